#ifndef FASU_IO_HPP
#define FASU_IO_HPP

#include "fasu/fas.hpp"
#include "fasu/fusion.hpp"
#include "fasu/net.hpp"
#include "fasu/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace fasu::io {

// "FAST" container: magic + version byte 1, rank byte, 32-bit LE extents,
// 64-bit LE float payload, row-major. Round trips bit-exactly.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Binary PGM (P5), 8- or 16-bit; intensities scaled to [0, 1] on load.
void save_pgm(const std::string& path, const Tensor& image, int maxval = 255);
Tensor load_pgm(const std::string& path);

// Masks ride in P5 as raw label bytes (maxval 255).
void save_mask_pgm(const std::string& path, const SegMask& mask);
SegMask load_mask_pgm(const std::string& path);

struct PhantomShape {
    enum class Kind { disk, rect };
    Kind kind;
    // disk: cx, cy, radius; rect: i0, j0, i1, j1 (inclusive-exclusive rows/cols)
    double a = 0, b = 0, c = 0, d = 0;
    int phase = 1;
};

struct PhantomSpec {
    std::size_t height = 128, width = 128;
    std::size_t phases = 2;
    std::vector<double> intensities = {0.2, 0.8}; // ascending, one per phase
    std::vector<PhantomShape> shapes;
    double noise_std = 0.0;
    double blur_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Phantom {
    Tensor image; // H x W
    SegMask gt;
};

/// Deterministic for a fixed seed: paint shapes, add Gaussian noise,
/// then blur (radius = ceil(3 sigma)) when blur_sigma > 0.
Phantom make_phantom(const PhantomSpec& spec);

// Flat key=value configuration text (lines, '#' comments).
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_config(const std::string& text);
KeyValues load_config(const std::string& path);

FasConfig fas_config_from(const KeyValues& kv);
ModelParams model_params_from(const KeyValues& kv);
net::NetConfig net_config_from(const KeyValues& kv);
net::TrainConfig train_config_from(const KeyValues& kv);
PhantomSpec phantom_spec_from(const KeyValues& kv);

// Checkpoint = directory of FAST tensors plus a plain-text manifest listing
// parameter names, shapes, and optimizer-state presence.
void save_checkpoint(const std::string& dir, const net::ParamStore& params,
                     bool with_optimizer_state);
void load_checkpoint(const std::string& dir, net::ParamStore& params);

/// CSV with a header row; numbers at 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Symmetric zero padding up to extents divisible by 2^(levels-1).
struct PadInfo {
    std::size_t top = 0, left = 0, height = 0, width = 0; // original extents
};
Tensor pad_to_divisible(const Tensor& image, std::size_t levels, PadInfo& info);
SegMask crop_mask(const SegMask& mask, const PadInfo& info);

} // namespace fasu::io

#endif
