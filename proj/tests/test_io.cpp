#include <doctest.h>

#include "fasu/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>

using namespace fasu;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("fasu_test_" + std::to_string(std::rand()) + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("tensor container round trip is bit-exact") {
    TempDir td;
    Tensor t = Tensor::random_normal({3, 5, 7}, 42);
    t[0] = 0.1 + 0.2; // a value with a non-trivial binary tail
    io::save_tensor(td.file("t.ft"), t);
    Tensor u = io::load_tensor(td.file("t.ft"));
    REQUIRE(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(u[i] == t[i]);
}

TEST_CASE("tensor container rejects corruption with byte offsets") {
    TempDir td;
    Tensor t = Tensor::random_normal({4, 4}, 1);
    io::save_tensor(td.file("t.ft"), t);

    // truncate the payload
    {
        std::ifstream in(td.file("t.ft"), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(td.file("trunc.ft"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
    }
    bool threw = false;
    try {
        io::load_tensor(td.file("trunc.ft"));
    } catch (const std::exception& e) {
        threw = true;
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
    CHECK(threw);

    // wrong magic
    {
        std::ofstream out(td.file("bad.ft"), std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS(io::load_tensor(td.file("bad.ft")));
}

TEST_CASE("pgm round trips") {
    TempDir td;
    Tensor img({5, 6});
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = double(i) / double(img.size() - 1);

    io::save_pgm(td.file("a.pgm"), img, 255);
    Tensor back = io::load_pgm(td.file("a.pgm"));
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back[i] - img[i]) <= 1.0 / 255.0);

    io::save_pgm(td.file("b.pgm"), img, 65535);
    Tensor back16 = io::load_pgm(td.file("b.pgm"));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back16[i] - img[i]) <= 1.0 / 65535.0);

    SegMask m(3, 4);
    m.at(1, 2) = 2;
    m.at(2, 3) = 1;
    io::save_mask_pgm(td.file("m.pgm"), m);
    SegMask mb = io::load_mask_pgm(td.file("m.pgm"));
    CHECK(mb == m);
}

TEST_CASE("make_phantom") {
    io::PhantomSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.phases = 2;
    spec.intensities = {0.2, 0.8};
    io::PhantomShape rect;
    rect.kind = io::PhantomShape::Kind::rect;
    rect.a = 4;
    rect.b = 6;
    rect.c = 12;
    rect.d = 16;
    rect.phase = 1;
    spec.shapes.push_back(rect);

    io::Phantom ph = io::make_phantom(spec);
    // noiseless, blurless image takes exactly the phase intensities
    for (std::size_t i = 0; i < ph.image.size(); ++i)
        CHECK((ph.image[i] == 0.2 || ph.image[i] == 0.8));

    // label counts match the analytic rectangle area
    int fg = 0;
    for (int v : ph.gt.labels) fg += (v == 1);
    CHECK(fg == (12 - 4) * (16 - 6));

    // determinism with noise
    spec.noise_std = 0.1;
    spec.seed = 7;
    io::Phantom p1 = io::make_phantom(spec);
    io::Phantom p2 = io::make_phantom(spec);
    for (std::size_t i = 0; i < p1.image.size(); ++i) CHECK(p1.image[i] == p2.image[i]);
    CHECK(p1.gt == p2.gt);
}

TEST_CASE("config parsing") {
    const std::string text = "# comment\n"
                             "mu = 2.5\n"
                             "levels=4\n"
                             "  kl = 2  \n"
                             "\n"
                             "tv = 0\n";
    io::KeyValues kv = io::parse_config(text);
    CHECK(kv.at("mu") == "2.5");
    CHECK(kv.at("levels") == "4");
    CHECK(kv.at("kl") == "2");

    FasConfig fc = io::fas_config_from(kv);
    CHECK(fc.levels == 4);
    CHECK(fc.k_pre == 2);

    ModelParams mp = io::model_params_from(kv);
    CHECK(mp.mu == 2.5);
    CHECK_FALSE(mp.tv_enabled);

    io::KeyValues nv;
    nv["p"] = "8";
    nv["classes"] = "3";
    nv["levels"] = "3";
    net::NetConfig nc = io::net_config_from(nv);
    CHECK(nc.channels == 8);
    CHECK(nc.classes == 3);
    CHECK(nc.levels == 3);

    io::KeyValues tv;
    tv["lr"] = "0.05";
    tv["epochs"] = "12";
    net::TrainConfig tc = io::train_config_from(tv);
    CHECK(tc.lr0 == 0.05);
    CHECK(tc.max_epochs == 12);
}

TEST_CASE("checkpoint round trip") {
    TempDir td;
    net::NetConfig cfg;
    cfg.levels = 2;
    cfg.channels = 2;
    cfg.k_pre = 1;
    cfg.k_coarse = 1;
    cfg.k_post = 1;
    cfg.classes = 2;
    net::ParamStore params = net::init_params(cfg, 3);
    params.at("K0").momentum = Tensor::random_normal(params.at("K0").momentum.shape(), 4);

    io::save_checkpoint(td.file("ckpt"), params, true);
    net::ParamStore loaded = net::init_params(cfg, 99);
    io::load_checkpoint(td.file("ckpt"), loaded);

    for (const std::string& name : params.names()) {
        const Tensor& a = params.at(name).value;
        const Tensor& b = loaded.at(name).value;
        REQUIRE(a.shape() == b.shape());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    const Tensor& ma = params.at("K0").momentum;
    const Tensor& mb = loaded.at("K0").momentum;
    for (std::size_t i = 0; i < ma.size(); ++i) CHECK(ma[i] == mb[i]);
}

TEST_CASE("csv writer") {
    TempDir td;
    io::write_csv(td.file("r.csv"), {"cycle", "residual"}, {{0.0, 1.5}, {1.0, 0.25}});
    std::ifstream in(td.file("r.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "cycle,residual");
    std::getline(in, line);
    CHECK(line.find("1.5") != std::string::npos);
}

TEST_CASE("padding and cropping") {
    Tensor img = Tensor::random_normal({10, 13}, 8);
    io::PadInfo info;
    Tensor padded = io::pad_to_divisible(img, 3, info);
    CHECK(padded.extent(0) % 4 == 0);
    CHECK(padded.extent(1) % 4 == 0);
    CHECK(info.height == 10);
    CHECK(info.width == 13);

    // padded interior reproduces the image
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 13; ++j)
            CHECK(padded.at(i + info.top, j + info.left) == img.at(i, j));

    SegMask big(padded.extent(0), padded.extent(1));
    for (std::size_t i = 0; i < big.height; ++i)
        for (std::size_t j = 0; j < big.width; ++j)
            big.at(i, j) = int((i + j) % 3);
    SegMask cropped = io::crop_mask(big, info);
    CHECK(cropped.height == 10);
    CHECK(cropped.width == 13);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 13; ++j)
            CHECK(cropped.at(i, j) == big.at(i + info.top, j + info.left));
}

TEST_SUITE_END();
