#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "inper/tensor.hpp"

namespace inper::datagen {

/// Background fill behind the class shape. Part of the domain style.
enum class Texture { kFlat, kNoise, kGradient };

Texture parse_texture(std::string_view name);
std::string_view texture_name(Texture t);

/// Rendering style of one domain. Domain identity is carried entirely by
/// channel statistics: per-channel gain/bias, contrast around a fixed pivot,
/// and the background texture. `leakage` (rho) adds a class-conditioned
/// channel shift whose class->direction assignment rotates per domain, so
/// style predicts class within a domain but the mapping does not transfer.
struct DomainSpec {
    std::size_t id = 0;
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    std::array<double, 3> bias{0.0, 0.0, 0.0};
    Texture texture = Texture::kFlat;
    double contrast = 1.0;
    double leakage = 0.3;  // rho in [0,1)
};

/// The four canonical domains used by the experiment defaults.
std::vector<DomainSpec> default_domain_specs();

struct DomainDataset {
    Tensor images;                     // [N,3,32,32], values in [0,1], f32-representable
    std::vector<std::size_t> labels;   // 1..K
    std::vector<std::size_t> domains;  // spec ids, parallel to labels
    std::string manifest_json;         // generation parameters, seed, format version

    std::size_t size() const { return labels.size(); }
};

/// Synthesize `per_domain` samples for every spec. Class shapes (1=disk,
/// 2=cross, 3=stripes, 4=ring) are rasterized at random position/scale with
/// the on-canvas area drawn from a class-independent distribution, then styled
/// per spec. Labels are stratified per domain (counts differ by at most one)
/// and rows are shuffled within each domain block. Deterministic per seed;
/// pixel values are quantized to f32 so file round-trips are value-exact.
DomainDataset generate(const std::vector<DomainSpec>& specs, std::size_t classes,
                       std::size_t per_domain, std::uint64_t seed);

struct LeaveOneOut {
    DomainDataset source;
    DomainDataset target;
};

/// Partition by domain id, preserving row order within each split.
LeaveOneOut leave_one_out(const DomainDataset& data, std::size_t target_domain);

// TDF tensor file:
//   "TDF1" | u8 dtype (1 = f32) | u8 rank | u32 LE extent per dim |
//   row-major f32 LE payload.
void write_tdf(std::ostream& os, const Tensor& t);
void write_tdf(const std::string& path, const Tensor& t);
Tensor read_tdf(std::istream& is);
/// Whole-file read; trailing bytes after the payload are a format error.
Tensor read_tdf(const std::string& path);

/// Dataset directory: images.tdf, labels.tdf, domains.tdf, manifest.json.
void write_dataset(const std::string& dir, const DomainDataset& data);
DomainDataset read_dataset(const std::string& dir);

}  // namespace inper::datagen
