#include "fasu/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fasu::io {

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& what,
                             std::streamoff offset) {
    throw std::runtime_error("parse error in " + path + " at byte " + std::to_string(offset) +
                             ": " + what);
}

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write("FAST", 4);
    f.put(1);
    f.put(static_cast<char>(t.rank()));
    for (std::size_t e : t.shape()) put_u32le(f, static_cast<std::uint32_t>(e));
    static_assert(sizeof(double) == 8);
    // Little-endian host assumed; the payload is raw IEEE doubles.
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * 8));
    if (!f) throw std::runtime_error("write failed for " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "FAST", 4) != 0) parse_fail(path, "bad magic", 0);
    const int version = f.get();
    if (version != 1) parse_fail(path, "unsupported version", 4);
    const int rank = f.get();
    if (rank < 1 || rank > 4) parse_fail(path, "bad rank", 5);
    std::vector<std::size_t> shape;
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t e = get_u32le(f);
        if (!f) parse_fail(path, "truncated extents", f.tellg());
        shape.push_back(e);
    }
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    if (f.gcount() != static_cast<std::streamsize>(t.size() * 8))
        parse_fail(path, "truncated payload",
                   static_cast<std::streamoff>(6 + 4 * rank) + f.gcount());
    return t;
}

namespace {

int pgm_read_token(std::istream& is, const std::string& path) {
    // Skips whitespace and '#' comment lines.
    int ch = is.get();
    while (is) {
        if (ch == '#') {
            while (is && ch != '\n') ch = is.get();
        } else if (std::isspace(ch)) {
            ch = is.get();
        } else {
            break;
        }
    }
    if (!is) parse_fail(path, "truncated header", is.tellg());
    int value = 0;
    bool any = false;
    while (is && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        any = true;
        ch = is.get();
    }
    if (!any) parse_fail(path, "malformed header token", is.tellg());
    return value;
}

} // namespace

void save_pgm(const std::string& path, const Tensor& image, int maxval) {
    if (image.rank() != 2) throw std::invalid_argument("save_pgm expects an H x W tensor");
    if (maxval != 255 && maxval != 65535)
        throw std::invalid_argument("save_pgm maxval must be 255 or 65535");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "P5\n" << image.extent(1) << " " << image.extent(0) << "\n" << maxval << "\n";
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        const long q = std::lround(v * maxval);
        if (maxval == 255) {
            f.put(static_cast<char>(q));
        } else {
            f.put(static_cast<char>(q >> 8)); // PGM 16-bit is big-endian
            f.put(static_cast<char>(q & 0xff));
        }
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

Tensor load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char m0 = static_cast<char>(f.get()), m1 = static_cast<char>(f.get());
    if (m0 != 'P' || m1 != '5') parse_fail(path, "unsupported magic (want P5)", 0);
    const int W = pgm_read_token(f, path);
    const int H = pgm_read_token(f, path);
    const int maxval = pgm_read_token(f, path);
    if (W <= 0 || H <= 0 || maxval <= 0 || maxval > 65535)
        parse_fail(path, "bad dimensions or maxval", f.tellg());
    Tensor img({static_cast<std::size_t>(H), static_cast<std::size_t>(W)});
    const bool wide = maxval > 255;
    for (std::size_t i = 0; i < img.size(); ++i) {
        int v = f.get();
        if (wide) {
            const int lo = f.get();
            v = (v << 8) | lo;
        }
        if (!f) parse_fail(path, "truncated payload", f.tellg());
        img[i] = static_cast<double>(v) / maxval;
    }
    return img;
}

void save_mask_pgm(const std::string& path, const SegMask& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    for (int v : mask.labels) {
        if (v < 0 || v > 255) throw std::invalid_argument("mask label out of byte range");
        f.put(static_cast<char>(v));
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

SegMask load_mask_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char m0 = static_cast<char>(f.get()), m1 = static_cast<char>(f.get());
    if (m0 != 'P' || m1 != '5') parse_fail(path, "unsupported magic (want P5)", 0);
    const int W = pgm_read_token(f, path);
    const int H = pgm_read_token(f, path);
    const int maxval = pgm_read_token(f, path);
    if (maxval != 255) parse_fail(path, "mask PGM must be 8-bit", f.tellg());
    SegMask mask(static_cast<std::size_t>(H), static_cast<std::size_t>(W));
    for (int& v : mask.labels) {
        v = f.get();
        if (v < 0) parse_fail(path, "truncated payload", f.tellg());
    }
    return mask;
}

void PhantomSpec::validate() const {
    if (phases < 2 || phases > 4) throw std::invalid_argument("phantom phases must be 2..4");
    if (intensities.size() != phases)
        throw std::invalid_argument("one intensity per phase required");
    for (std::size_t i = 1; i < phases; ++i)
        if (!(intensities[i - 1] < intensities[i]))
            throw std::invalid_argument("intensities must be strictly ascending");
    for (const PhantomShape& s : shapes) {
        if (s.phase < 1 || static_cast<std::size_t>(s.phase) >= phases)
            throw std::invalid_argument("shape phase out of range");
        if (s.kind == PhantomShape::Kind::disk) {
            if (s.a - s.c < 0 || s.a + s.c > static_cast<double>(height) || s.b - s.c < 0 ||
                s.b + s.c > static_cast<double>(width))
                throw std::invalid_argument("disk out of bounds");
        } else {
            if (s.a < 0 || s.b < 0 || s.c > static_cast<double>(height) ||
                s.d > static_cast<double>(width) || s.a >= s.c || s.b >= s.d)
                throw std::invalid_argument("rect out of bounds");
        }
    }
}

Phantom make_phantom(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t H = spec.height, W = spec.width;
    Phantom ph{Tensor::full({H, W}, spec.intensities[0]), SegMask(H, W)};
    for (const PhantomShape& s : spec.shapes) {
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                bool inside;
                if (s.kind == PhantomShape::Kind::disk) {
                    const double di = static_cast<double>(i) - s.a;
                    const double dj = static_cast<double>(j) - s.b;
                    inside = di * di + dj * dj <= s.c * s.c;
                } else {
                    inside = static_cast<double>(i) >= s.a && static_cast<double>(i) < s.c &&
                             static_cast<double>(j) >= s.b && static_cast<double>(j) < s.d;
                }
                if (inside) {
                    ph.image.at(i, j) = spec.intensities[static_cast<std::size_t>(s.phase)];
                    ph.gt.at(i, j) = s.phase;
                }
            }
    }
    if (spec.noise_std > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> dist(0.0, spec.noise_std);
        for (std::size_t i = 0; i < ph.image.size(); ++i) ph.image[i] += dist(rng);
    }
    if (spec.blur_sigma > 0.0) {
        ModelParams p;
        p.blur = BlurSpec::gaussian(spec.blur_sigma,
                                    static_cast<int>(std::ceil(3.0 * spec.blur_sigma)), 1);
        Tensor wrapped({1, H, W});
        std::copy(ph.image.data(), ph.image.data() + ph.image.size(), wrapped.data());
        ph.image = apply_A(wrapped, p);
    }
    return ph;
}

KeyValues parse_config(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "shape") {
            kv[key] += (kv[key].empty() ? "" : ";") + value; // repeated key accumulates
        } else {
            kv[key] = value;
        }
    }
    return kv;
}

KeyValues load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

namespace {

double get_num(const KeyValues& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
}

std::size_t get_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
}

} // namespace

FasConfig fas_config_from(const KeyValues& kv) {
    FasConfig cfg;
    cfg.levels = get_size(kv, "levels", cfg.levels);
    cfg.k_pre = get_size(kv, "kl", cfg.k_pre);
    cfg.k_coarse = get_size(kv, "km", cfg.k_coarse);
    cfg.k_post = get_size(kv, "kr", cfg.k_post);
    cfg.cycles = get_size(kv, "cycles", cfg.cycles);
    cfg.tau = get_num(kv, "tau", cfg.tau);
    cfg.min_coarse_extent = get_size(kv, "min_coarse_extent", cfg.min_coarse_extent);
    return cfg;
}

ModelParams model_params_from(const KeyValues& kv) {
    ModelParams p;
    p.mu = get_num(kv, "mu", p.mu);
    p.nu = get_num(kv, "nu", p.nu);
    p.eps_tv = get_num(kv, "eps", p.eps_tv);
    p.channels = get_size(kv, "d", 1);
    p.tv_enabled = get_size(kv, "tv", 1) != 0;
    const auto kind = kv.find("blur");
    if (kind != kv.end() && kind->second == "gaussian")
        p.blur = BlurSpec::gaussian(get_num(kv, "blur_sigma", 1.0),
                                    static_cast<int>(get_size(kv, "blur_radius", 2)),
                                    p.channels);
    else
        p.blur = BlurSpec::identity(p.channels);
    return p;
}

net::NetConfig net_config_from(const KeyValues& kv) {
    net::NetConfig cfg;
    cfg.levels = get_size(kv, "levels", cfg.levels);
    cfg.channels = get_size(kv, "p", cfg.channels);
    cfg.k_pre = get_size(kv, "kl", cfg.k_pre);
    cfg.k_coarse = get_size(kv, "km", cfg.k_coarse);
    cfg.k_post = get_size(kv, "kr", cfg.k_post);
    cfg.classes = get_size(kv, "classes", cfg.classes);
    cfg.in_channels = get_size(kv, "in_channels", cfg.in_channels);
    cfg.kernel_extent = get_size(kv, "kc", cfg.kernel_extent);
    cfg.weight_share_inner = get_size(kv, "share_inner", 0) != 0;
    cfg.spatial_dims = get_size(kv, "dims", cfg.spatial_dims);
    cfg.channel_ratio = get_num(kv, "ratio", cfg.channel_ratio);
    const auto init = kv.find("init");
    if (init != kv.end()) {
        if (init->second == "zero") cfg.init_mode = net::InitMode::zero;
        else if (init->second == "random") cfg.init_mode = net::InitMode::random;
        else if (init->second == "learned_conv") cfg.init_mode = net::InitMode::learned_conv;
        else throw std::runtime_error("unknown init mode " + init->second);
    }
    return cfg;
}

net::TrainConfig train_config_from(const KeyValues& kv) {
    net::TrainConfig cfg;
    cfg.lr0 = get_num(kv, "lr", cfg.lr0);
    cfg.momentum = get_num(kv, "momentum", cfg.momentum);
    cfg.weight_decay = get_num(kv, "weight_decay", cfg.weight_decay);
    cfg.batch_size = get_size(kv, "batch", cfg.batch_size);
    cfg.max_epochs = get_size(kv, "epochs", cfg.max_epochs);
    cfg.poly_power = get_num(kv, "poly_power", cfg.poly_power);
    cfg.seed = get_size(kv, "seed", cfg.seed);
    return cfg;
}

PhantomSpec phantom_spec_from(const KeyValues& kv) {
    PhantomSpec spec;
    spec.height = get_size(kv, "height", spec.height);
    spec.width = get_size(kv, "width", spec.width);
    spec.phases = get_size(kv, "phases", spec.phases);
    spec.noise_std = get_num(kv, "noise", 0.0);
    spec.blur_sigma = get_num(kv, "blur_sigma", 0.0);
    spec.seed = get_size(kv, "seed", 0);
    const auto ints = kv.find("intensities");
    if (ints != kv.end()) {
        spec.intensities.clear();
        std::istringstream ss(ints->second);
        double v;
        while (ss >> v) spec.intensities.push_back(v);
    }
    const auto shapes = kv.find("shape");
    if (shapes != kv.end()) {
        spec.shapes.clear();
        std::istringstream all(shapes->second);
        std::string one;
        while (std::getline(all, one, ';')) {
            std::istringstream ss(one);
            std::string kind;
            PhantomShape s;
            ss >> kind;
            if (kind == "disk") {
                s.kind = PhantomShape::Kind::disk;
                if (!(ss >> s.a >> s.b >> s.c >> s.phase))
                    throw std::runtime_error("bad disk shape spec: " + one);
            } else if (kind == "rect") {
                s.kind = PhantomShape::Kind::rect;
                if (!(ss >> s.a >> s.b >> s.c >> s.d >> s.phase))
                    throw std::runtime_error("bad rect shape spec: " + one);
            } else {
                throw std::runtime_error("unknown shape kind " + kind);
            }
            spec.shapes.push_back(s);
        }
    }
    return spec;
}

void save_checkpoint(const std::string& dir, const net::ParamStore& params,
                     bool with_optimizer_state) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("cannot write checkpoint manifest in " + dir);
    manifest << "format fasu-checkpoint 1\n";
    manifest << "optimizer_state " << (with_optimizer_state ? 1 : 0) << "\n";
    std::size_t index = 0;
    for (const std::string& name : params.names()) {
        const net::ParamEntry& e = params.at(name);
        const std::string file = std::to_string(index) + ".ft";
        manifest << "param " << name << " " << file << " shape";
        for (std::size_t ext : e.value.shape()) manifest << " " << ext;
        manifest << " trainable " << (e.trainable ? 1 : 0) << "\n";
        save_tensor((fs::path(dir) / file).string(), e.value);
        if (with_optimizer_state && e.trainable)
            save_tensor((fs::path(dir) / (std::to_string(index) + ".mom.ft")).string(),
                        e.momentum);
        ++index;
    }
}

void load_checkpoint(const std::string& dir, net::ParamStore& params) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("cannot open checkpoint manifest in " + dir);
    std::string line;
    bool with_mom = false;
    while (std::getline(manifest, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "optimizer_state") {
            int v;
            ss >> v;
            with_mom = v != 0;
        } else if (tag == "param") {
            std::string name, file;
            ss >> name >> file;
            net::ParamEntry& e = params.at(name);
            Tensor v = load_tensor((fs::path(dir) / file).string());
            if (!v.same_shape(e.value))
                throw std::runtime_error("checkpoint shape mismatch for " + name);
            e.value = std::move(v);
            if (with_mom && e.trainable) {
                const std::string mfile =
                    file.substr(0, file.size() - 3) + ".mom.ft";
                e.momentum = load_tensor((fs::path(dir) / mfile).string());
            }
        }
    }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
        f << (i ? "," : "") << header[i];
    f << "\n";
    f.precision(17);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            f << (i ? "," : "") << row[i];
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

Tensor pad_to_divisible(const Tensor& image, std::size_t levels, PadInfo& info) {
    if (image.rank() != 2) throw std::invalid_argument("pad_to_divisible expects H x W");
    const std::size_t f = std::size_t{1} << (levels - 1);
    const std::size_t H = image.extent(0), W = image.extent(1);
    const std::size_t Hp = (H + f - 1) / f * f, Wp = (W + f - 1) / f * f;
    info = {(Hp - H) / 2, (Wp - W) / 2, H, W};
    Tensor out({Hp, Wp});
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
            out.at(i + info.top, j + info.left) = image.at(i, j);
    return out;
}

SegMask crop_mask(const SegMask& mask, const PadInfo& info) {
    SegMask out(info.height, info.width);
    for (std::size_t i = 0; i < info.height; ++i)
        for (std::size_t j = 0; j < info.width; ++j)
            out.at(i, j) = mask.at(i + info.top, j + info.left);
    return out;
}

} // namespace fasu::io
