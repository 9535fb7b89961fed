#include "inper/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "inper/errors.hpp"
#include "inper/io_le.hpp"

namespace inper::datagen {

namespace {

constexpr std::size_t kSide = 32;
constexpr std::size_t kChannels = 3;
constexpr std::size_t kMaxClasses = 4;  // one shape per class

// Canvas levels before styling. Foreground is kept at 0.5 so a gain of 2
// still maps into [0,1] without clamping.
constexpr double kBgFlat = 0.20;
constexpr double kFg = 0.55;
constexpr double kPivot = 0.25;      // contrast pivot
constexpr double kNoiseAmp = 0.05;   // background noise half-range
constexpr double kGradLo = 0.10;     // gradient background endpoints
constexpr double kGradHi = 0.36;
constexpr double kEdge = 1.0;        // soft-edge band in pixels

// On-canvas foreground area band, shared by all classes so shape area cannot
// leak class into channel means.
constexpr double kAreaLo = 120.0;
constexpr double kAreaHi = 190.0;

constexpr double kCenterLo = 10.0;
constexpr double kCenterHi = 22.0;

// Per-sample appearance jitter around the domain's style center. Without it a
// domain is a single point in style space and any class-conditioned shift
// becomes a noiseless shortcut; with it, style carries domain identity only
// in distribution.
constexpr double kGainJitter = 0.10;      // multiplicative half-range
constexpr double kBiasJitter = 0.05;      // additive half-range
constexpr double kContrastJitter = 0.08;  // multiplicative half-range

// Class-conditioned style shift: a convex mix of a direction fixed per class
// (transfers across domains) and one rotated by the domain's position in the
// spec list (misleading on a held-out domain). The mix weight dials how much
// of the style cue fails to transfer.
constexpr double kLeakScale = 0.62;
constexpr double kLeakMix = 0.72;
constexpr double kLeakDir[kMaxClasses][kChannels] = {
    {+1.0, -1.0, 0.0},
    {-1.0, 0.0, +1.0},
    {0.0, +1.0, -1.0},
    {+1.0, +1.0, -1.0},
};
// Directions for the domain-invariant component, disjoint from kLeakDir so
// the rotated component is misleading for every domain position.
constexpr double kLeakFixedDir[kMaxClasses][kChannels] = {
    {+1.0, 0.0, -1.0},
    {0.0, -1.0, +1.0},
    {-1.0, +1.0, 0.0},
    {-1.0, -1.0, +1.0},
};

struct ShapeParams {
    int cls0 = 0;  // 0 disk, 1 cross, 2 stripes, 3 ring
    double cx = 0.0, cy = 0.0;
    double cos_t = 1.0, sin_t = 0.0;
    double base = 0.0;  // radius (disk), bar width (cross/stripes), mid radius (ring)
};

double soft(double signed_dist) {
    return std::clamp(signed_dist / kEdge + 0.5, 0.0, 1.0);
}

double soft_rect(double dx, double dy, double half_x, double half_y) {
    return soft(half_x - std::abs(dx)) * soft(half_y - std::abs(dy));
}

double membership(const ShapeParams& sp, double scale, double px, double py) {
    const double dx = px - sp.cx;
    const double dy = py - sp.cy;
    switch (sp.cls0) {
        case 0:
            return soft(sp.base * scale - std::sqrt(dx * dx + dy * dy));
        case 1: {  // cross: two bars of length 4w, width w
            const double dxr = sp.cos_t * dx + sp.sin_t * dy;
            const double dyr = -sp.sin_t * dx + sp.cos_t * dy;
            const double hl = 2.0 * sp.base * scale;
            const double hw = 0.5 * sp.base * scale;
            return std::max(soft_rect(dxr, dyr, hl, hw), soft_rect(dxr, dyr, hw, hl));
        }
        case 2: {  // stripes: three bars of length 6w, width w, pitch 2.6w
            const double dxr = sp.cos_t * dx + sp.sin_t * dy;
            const double dyr = -sp.sin_t * dx + sp.cos_t * dy;
            const double hl = 3.0 * sp.base * scale;
            const double hw = 0.5 * sp.base * scale;
            const double pitch = 2.6 * sp.base * scale;
            double m = 0.0;
            for (int k = -1; k <= 1; ++k) {
                m = std::max(m, soft_rect(dxr, dyr - double(k) * pitch, hl, hw));
            }
            return m;
        }
        default: {  // ring: annulus of half-width 0.26 * mid radius
            const double rm = sp.base * scale;
            const double dist = std::sqrt(dx * dx + dy * dy);
            return soft(0.26 * rm - std::abs(dist - rm));
        }
    }
}

// Farthest point of the shape from its center, used to bound raster loops.
double reach(const ShapeParams& sp, double scale) {
    const double b = sp.base * scale;
    switch (sp.cls0) {
        case 0: return b;
        case 1: return b * 2.07;             // sqrt((2w)^2 + (w/2)^2)
        case 2: return b * 4.32;             // sqrt((3w)^2 + (3.1w)^2)
        default: return b * 1.26;
    }
}

struct PixelBounds {
    std::size_t y0, y1, x0, x1;  // half-open
};

PixelBounds bounds(const ShapeParams& sp, double scale) {
    const double r = reach(sp, scale) + kEdge + 1.0;
    auto lo = [](double v) { return std::size_t(std::clamp(std::floor(v), 0.0, double(kSide))); };
    auto hi = [](double v) {
        return std::size_t(std::clamp(std::ceil(v) + 1.0, 0.0, double(kSide)));
    };
    return {lo(sp.cy - r), hi(sp.cy + r), lo(sp.cx - r), hi(sp.cx + r)};
}

double raster_sum(const ShapeParams& sp, double scale) {
    const PixelBounds b = bounds(sp, scale);
    double total = 0.0;
    for (std::size_t y = b.y0; y < b.y1; ++y) {
        for (std::size_t x = b.x0; x < b.x1; ++x) {
            total += membership(sp, scale, double(x) + 0.5, double(y) + 0.5);
        }
    }
    return total;
}

void raster_fill(const ShapeParams& sp, double scale, std::array<double, kSide * kSide>& out) {
    out.fill(0.0);
    const PixelBounds b = bounds(sp, scale);
    for (std::size_t y = b.y0; y < b.y1; ++y) {
        for (std::size_t x = b.x0; x < b.x1; ++x) {
            out[y * kSide + x] = membership(sp, scale, double(x) + 0.5, double(y) + 0.5);
        }
    }
}

// Scale multiplier that makes the on-canvas membership sum hit `area`.
// Monotone in scale, so plain bisection; a heavily clipped shape saturates at
// the upper bound.
double solve_scale(const ShapeParams& sp, double area) {
    double lo = 0.55, hi = 1.60;
    if (raster_sum(sp, hi) <= area) return hi;
    for (int it = 0; it < 16; ++it) {
        const double mid = 0.5 * (lo + hi);
        (raster_sum(sp, mid) < area ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void synth_sample(Tensor& images, std::size_t row, std::size_t label, std::size_t domain_index,
                  const DomainSpec& spec, std::size_t classes, RngStream& rng) {
    ShapeParams sp;
    sp.cls0 = int(label - 1);
    const double area = rng.uniform(kAreaLo, kAreaHi);
    sp.cx = rng.uniform(kCenterLo, kCenterHi);
    sp.cy = rng.uniform(kCenterLo, kCenterHi);
    if (sp.cls0 == 1 || sp.cls0 == 2) {
        const double theta = rng.uniform(-std::numbers::pi / 16.0, std::numbers::pi / 16.0);
        sp.cos_t = std::cos(theta);
        sp.sin_t = std::sin(theta);
    }
    switch (sp.cls0) {
        case 0: sp.base = std::sqrt(area / std::numbers::pi); break;
        case 1: sp.base = std::sqrt(area / 7.0); break;   // 2Lw - w^2 with L = 4w
        case 2: sp.base = std::sqrt(area / 18.0); break;  // 3Lw with L = 6w
        default: sp.base = std::sqrt(area / (1.04 * std::numbers::pi)); break;
    }

    std::array<double, kSide * kSide> mask;
    raster_fill(sp, solve_scale(sp, area), mask);

    std::array<double, kChannels> gain_jit, bias_jit;
    for (std::size_t c = 0; c < kChannels; ++c) {
        gain_jit[c] = 1.0 + rng.uniform(-kGainJitter, kGainJitter);
    }
    for (std::size_t c = 0; c < kChannels; ++c) {
        bias_jit[c] = rng.uniform(-kBiasJitter, kBiasJitter);
    }
    const double contrast = spec.contrast * (1.0 + rng.uniform(-kContrastJitter, kContrastJitter));

    std::array<double, kSide * kSide> bg;
    switch (spec.texture) {
        case Texture::kFlat:
            bg.fill(kBgFlat);
            break;
        case Texture::kNoise:
            for (double& v : bg) v = kBgFlat + rng.uniform(-kNoiseAmp, kNoiseAmp);
            break;
        case Texture::kGradient:
            for (std::size_t y = 0; y < kSide; ++y) {
                for (std::size_t x = 0; x < kSide; ++x) {
                    bg[y * kSide + x] = kGradLo + (kGradHi - kGradLo) * double(x) / double(kSide - 1);
                }
            }
            break;
    }

    const std::size_t fixed_row = std::size_t(sp.cls0) % classes;
    const std::size_t rotated_row = (std::size_t(sp.cls0) + domain_index) % classes;
    for (std::size_t c = 0; c < kChannels; ++c) {
        const double dir = (1.0 - kLeakMix) * kLeakFixedDir[fixed_row][c] +
                           kLeakMix * kLeakDir[rotated_row][c];
        // Multiplicative so the cue scales with content instead of shifting the
        // black point; keeps per-channel means centred and nothing clips.
        const double leak = 1.0 + spec.leakage * kLeakScale * dir;
        for (std::size_t p = 0; p < kSide * kSide; ++p) {
            double v = bg[p] + (kFg - bg[p]) * mask[p];
            v = contrast * (v - kPivot) + kPivot;
            v = spec.gain[c] * gain_jit[c] * leak * v + spec.bias[c] + bias_jit[c];
            v = std::clamp(v, 0.0, 1.0);
            images.at4(row, c, p / kSide, p % kSide) = double(float(v));
        }
    }
}

void validate_specs(const std::vector<DomainSpec>& specs, std::size_t classes,
                    std::size_t per_domain) {
    if (specs.size() < 2) throw ValueError("generate requires at least two domains");
    if (classes < 2 || classes > kMaxClasses) {
        throw ValueError("classes must be between 2 and 4 (one shape per class)");
    }
    if (per_domain == 0) throw ValueError("per-domain count must be positive");
    std::set<std::size_t> ids;
    for (const DomainSpec& s : specs) {
        if (!ids.insert(s.id).second) {
            throw ValueError("duplicate domain id " + std::to_string(s.id));
        }
        for (std::size_t c = 0; c < kChannels; ++c) {
            if (!(s.gain[c] > 0.0) || !std::isfinite(s.gain[c])) {
                throw ValueError("domain gains must be positive and finite");
            }
            if (!std::isfinite(s.bias[c])) throw ValueError("domain bias must be finite");
        }
        if (!(s.contrast > 0.0) || !std::isfinite(s.contrast)) {
            throw ValueError("domain contrast must be positive and finite");
        }
        if (!(s.leakage >= 0.0) || !(s.leakage < 1.0)) {
            throw ValueError("leakage rho must lie in [0,1)");
        }
    }
}

std::string build_manifest(const std::vector<DomainSpec>& specs, std::size_t classes,
                           std::size_t per_domain, std::uint64_t seed) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["seed"] = seed;
    j["classes"] = classes;
    j["per_domain"] = per_domain;
    nlohmann::json doms = nlohmann::json::array();
    for (const DomainSpec& s : specs) {
        doms.push_back({{"id", s.id},
                        {"gain", s.gain},
                        {"bias", s.bias},
                        {"texture", std::string(texture_name(s.texture))},
                        {"contrast", s.contrast},
                        {"leakage", s.leakage}});
    }
    j["domains"] = std::move(doms);
    return j.dump(2) + "\n";
}

// Gather a subset of rows preserving order.
DomainDataset gather_rows(const DomainDataset& data, const std::vector<std::size_t>& rows) {
    DomainDataset out;
    const std::size_t stride = kChannels * kSide * kSide;
    out.images = Tensor::zeros({rows.size(), kChannels, kSide, kSide});
    out.labels.reserve(rows.size());
    out.domains.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        std::memcpy(out.images.data() + i * stride, data.images.data() + r * stride,
                    stride * sizeof(double));
        out.labels.push_back(data.labels[r]);
        out.domains.push_back(data.domains[r]);
    }
    out.manifest_json = data.manifest_json;
    return out;
}

// Integral value embedded in an f32 field, or throw.
std::size_t read_index(double v, const char* what) {
    const double r = std::floor(v + 0.5);
    if (!std::isfinite(v) || std::abs(v - r) > 1e-9 || r < 0.0 || r > 16777216.0) {
        throw FormatError(std::string("non-integral ") + what + " value in dataset");
    }
    return std::size_t(r);
}

}  // namespace

Texture parse_texture(std::string_view name) {
    if (name == "flat") return Texture::kFlat;
    if (name == "noise") return Texture::kNoise;
    if (name == "gradient") return Texture::kGradient;
    throw ConfigError("unknown texture '" + std::string(name) + "'");
}

std::string_view texture_name(Texture t) {
    switch (t) {
        case Texture::kFlat: return "flat";
        case Texture::kNoise: return "noise";
        default: return "gradient";
    }
}

std::vector<DomainSpec> default_domain_specs() {
    std::vector<DomainSpec> specs(4);
    specs[0] = {1, {1.00, 1.00, 1.00}, {0.00, 0.00, 0.00}, Texture::kFlat, 1.00, 0.3};
    specs[1] = {2, {2.30, 0.60, 0.80}, {-0.32, 0.10, 0.06}, Texture::kNoise, 0.80, 0.3};
    specs[2] = {3, {0.52, 2.60, 0.90}, {0.12, -0.37, 0.03}, Texture::kGradient, 1.50, 0.3};
    specs[3] = {4, {0.72, 0.52, 2.45}, {0.08, 0.13, -0.36}, Texture::kNoise, 0.55, 0.3};
    return specs;
}

DomainDataset generate(const std::vector<DomainSpec>& specs, std::size_t classes,
                       std::size_t per_domain, std::uint64_t seed) {
    validate_specs(specs, classes, per_domain);
    const std::size_t total = specs.size() * per_domain;
    DomainDataset out;
    out.images = Tensor::zeros({total, kChannels, kSide, kSide});
    out.labels.resize(total);
    out.domains.resize(total);
    RngStream rng(derive_seed(seed, "datagen"));
    std::size_t row = 0;
    for (std::size_t d = 0; d < specs.size(); ++d) {
        // Stratified label block, shuffled so minibatch sampling sees mixed rows.
        std::vector<std::size_t> block;
        block.reserve(per_domain);
        for (std::size_t k = 0; k < classes; ++k) {
            const std::size_t count = per_domain / classes + (k < per_domain % classes ? 1 : 0);
            block.insert(block.end(), count, k + 1);
        }
        const std::vector<std::size_t> perm = batch_permutation(per_domain, rng);
        for (std::size_t i = 0; i < per_domain; ++i, ++row) {
            const std::size_t label = block[perm[i]];
            synth_sample(out.images, row, label, d, specs[d], classes, rng);
            out.labels[row] = label;
            out.domains[row] = specs[d].id;
        }
    }
    out.manifest_json = build_manifest(specs, classes, per_domain, seed);
    return out;
}

LeaveOneOut leave_one_out(const DomainDataset& data, std::size_t target_domain) {
    std::vector<std::size_t> src_rows, tgt_rows;
    for (std::size_t i = 0; i < data.domains.size(); ++i) {
        (data.domains[i] == target_domain ? tgt_rows : src_rows).push_back(i);
    }
    if (tgt_rows.empty()) {
        throw NotFoundError("unknown target domain " + std::to_string(target_domain));
    }
    if (src_rows.empty()) {
        throw ValueError("leave_one_out would leave an empty source split");
    }
    return {gather_rows(data, src_rows), gather_rows(data, tgt_rows)};
}

void write_tdf(std::ostream& os, const Tensor& t) {
    io::write_magic(os, "TDF1");
    io::write_u8(os, 1);  // dtype f32
    io::write_u8(os, std::uint8_t(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) {
        io::write_u32(os, std::uint32_t(t.extent(d)));
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
        io::write_f32(os, float(t[i]));
    }
}

void write_tdf(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    write_tdf(os, t);
    os.flush();
    if (!os) throw FormatError("write failed for '" + path + "'");
}

Tensor read_tdf(std::istream& is) {
    io::expect_magic(is, "TDF1", "TDF");
    const std::uint8_t dtype = io::read_u8(is, "TDF dtype");
    if (dtype != 1) throw FormatError("unsupported TDF dtype " + std::to_string(dtype));
    const std::uint8_t rank = io::read_u8(is, "TDF rank");
    if (rank == 0) throw FormatError("TDF tensor has rank 0");
    if (rank > 4) throw FormatError("TDF rank " + std::to_string(rank) + " exceeds 4");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::size_t d = 0; d < rank; ++d) {
        const std::uint32_t e = io::read_u32(is, "TDF extent");
        if (e == 0) throw FormatError("TDF tensor has a zero extent");
        if (numel > (std::size_t(1) << 28) / e) {
            throw FormatError("TDF payload implausibly large");
        }
        shape[d] = e;
        numel *= e;
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        data[i] = double(io::read_f32(is, "TDF payload"));
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor read_tdf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("no such TDF file: " + path);
    Tensor t = read_tdf(is);
    if (is.peek() != std::ifstream::traits_type::eof()) {
        throw FormatError("trailing bytes after TDF payload in '" + path + "'");
    }
    return t;
}

void write_dataset(const std::string& dir, const DomainDataset& data) {
    if (data.labels.size() != data.images.extent(0) || data.domains.size() != data.labels.size()) {
        throw ValueError("dataset rows, labels and domains must align");
    }
    if (!nlohmann::json::accept(data.manifest_json)) {
        throw ValueError("dataset manifest is not valid JSON");
    }
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_tdf((fs::path(dir) / "images.tdf").string(), data.images);
    auto as_f32_vec = [](const std::vector<std::size_t>& v) {
        std::vector<double> d(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) d[i] = double(v[i]);
        return Tensor({v.size()}, std::move(d));
    };
    write_tdf((fs::path(dir) / "labels.tdf").string(), as_f32_vec(data.labels));
    write_tdf((fs::path(dir) / "domains.tdf").string(), as_f32_vec(data.domains));
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    std::ofstream ms(mpath, std::ios::binary);
    if (!ms) throw FormatError("cannot open '" + mpath + "' for writing");
    ms << data.manifest_json;
    ms.flush();
    if (!ms) throw FormatError("write failed for '" + mpath + "'");
}

DomainDataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NotFoundError("no such dataset directory: " + dir);
    auto need = [&](const char* name) {
        fs::path p = fs::path(dir) / name;
        if (!fs::is_regular_file(p)) {
            throw NotFoundError("dataset is missing " + std::string(name) + " in " + dir);
        }
        return p.string();
    };

    DomainDataset out;
    out.images = read_tdf(need("images.tdf"));
    const Tensor labels = read_tdf(need("labels.tdf"));
    const Tensor domains = read_tdf(need("domains.tdf"));
    {
        std::ifstream ms(need("manifest.json"), std::ios::binary);
        std::ostringstream buf;
        buf << ms.rdbuf();
        out.manifest_json = buf.str();
    }
    nlohmann::json manifest = nlohmann::json::parse(out.manifest_json, nullptr, false);
    if (manifest.is_discarded()) throw FormatError("invalid manifest.json in " + dir);
    if (!manifest.contains("classes") || !manifest["classes"].is_number_unsigned()) {
        throw FormatError("manifest.json lacks a classes field");
    }
    const std::size_t classes = manifest["classes"].get<std::size_t>();
    std::set<std::size_t> known_ids;
    for (const auto& d : manifest.value("domains", nlohmann::json::array())) {
        if (d.contains("id")) known_ids.insert(d["id"].get<std::size_t>());
    }

    if (out.images.rank() != 4 || out.images.extent(1) != kChannels) {
        throw FormatError("images.tdf must hold an [N,3,H,W] tensor");
    }
    const std::size_t n = out.images.extent(0);
    if (labels.rank() != 1 || labels.numel() != n || domains.rank() != 1 || domains.numel() != n) {
        throw FormatError("labels.tdf/domains.tdf lengths do not match images.tdf");
    }
    for (std::size_t i = 0; i < out.images.numel(); ++i) {
        const double v = out.images[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw FormatError("image values outside [0,1] in " + dir);
        }
    }
    out.labels.resize(n);
    out.domains.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.labels[i] = read_index(labels[i], "label");
        if (out.labels[i] < 1 || out.labels[i] > classes) {
            throw FormatError("label out of range 1..K in " + dir);
        }
        out.domains[i] = read_index(domains[i], "domain");
        if (!known_ids.empty() && !known_ids.count(out.domains[i])) {
            throw FormatError("domain id absent from manifest in " + dir);
        }
    }
    return out;
}

}  // namespace inper::datagen
