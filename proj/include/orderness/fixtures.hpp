// Synthetic calibration datasets with known orderness.
//
// diffusion: a single Gaussian random walk scanned through the image in
// serpentine order, so consecutive steps along either axis differ by one or
// more independent N(0,sigma) increments and the one-hop/two-hop variance
// ratio is exactly 2 in expectation (so = 1).
// iid: independent U[0,1) pixels (so = 0 at every scale).
// const-plus-noise: per-image constant plus N(0,sigma) pixels (so = 0 at
// every scale).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orderness/dataset.hpp"
#include "orderness/errors.hpp"
#include "orderness/grid.hpp"
#include "orderness/rng.hpp"

namespace orderness {

enum class FixtureKind { Diffusion, Iid, ConstPlusNoise };

inline const char* fixture_kind_name(FixtureKind k) {
    switch (k) {
        case FixtureKind::Diffusion: return "diffusion";
        case FixtureKind::Iid: return "iid";
        case FixtureKind::ConstPlusNoise: return "const-plus-noise";
    }
    return "?";
}

inline FixtureKind fixture_kind_from_name(const std::string& s) {
    if (s == "diffusion") return FixtureKind::Diffusion;
    if (s == "iid") return FixtureKind::Iid;
    if (s == "const-plus-noise") return FixtureKind::ConstPlusNoise;
    raise(Err::InvalidArgument, "unknown fixture kind: " + s);
}

struct FixtureSpec {
    FixtureKind kind = FixtureKind::Diffusion;
    size_t count = 100;
    int height = 32;
    int width = 32;
    double sigma = 0.1;
    uint64_t seed = 0;
};

inline Grid2D diffusion_grid(int h, int w, double sigma, Rng& rng) {
    Grid2D g(h, w);
    double x = rng.normal();
    for (int r = 0; r < h; ++r) {
        bool reversed = (r % 2 == 1);
        for (int i = 0; i < w; ++i) {
            int c = reversed ? (w - 1 - i) : i;
            x += rng.normal(0.0, sigma);
            g.at(r, c) = x;
        }
    }
    return g;
}

inline Grid2D iid_grid(int h, int w, Rng& rng) {
    Grid2D g(h, w);
    for (double& v : g.values) v = rng.uniform();
    return g;
}

inline Grid2D const_plus_noise_grid(int h, int w, double sigma, Rng& rng) {
    Grid2D g(h, w);
    double a = rng.uniform();
    for (double& v : g.values) v = a + rng.normal(0.0, sigma);
    return g;
}

inline Dataset generate_fixture(const FixtureSpec& spec) {
    require(spec.count >= 1, Err::InvalidArgument, "fixture count must be positive");
    require(spec.height >= 1 && spec.width >= 1, Err::InvalidArgument,
            "fixture dims must be positive");
    Dataset ds;
    ds.num_classes = 1;
    for (size_t i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(spec.seed, {stream::kFixture, static_cast<uint64_t>(i)}));
        Grid2D g;
        switch (spec.kind) {
            case FixtureKind::Diffusion: g = diffusion_grid(spec.height, spec.width, spec.sigma, rng); break;
            case FixtureKind::Iid: g = iid_grid(spec.height, spec.width, rng); break;
            case FixtureKind::ConstPlusNoise:
                g = const_plus_noise_grid(spec.height, spec.width, spec.sigma, rng);
                break;
        }
        ds.images.push_back(Image::from_grid(g));
        ds.labels.push_back(0);
    }
    ds.provenance["source"] = std::string("fixture:") + fixture_kind_name(spec.kind);
    ds.provenance["sigma"] = format_real(spec.sigma);
    ds.provenance["fixture_seed"] = std::to_string(spec.seed);
    return ds;
}

// One fixed position permutation applied identically to every channel of
// every image; removes all spatial order while keeping value statistics.
inline Dataset permute_pixels(const Dataset& ds, uint64_t seed) {
    require(!ds.images.empty(), Err::EmptyInput, "dataset has no images");
    size_t plane = ds.images[0].plane_size();
    auto perm = random_permutation(plane, seed);
    Dataset out = ds;
    for (size_t n = 0; n < out.images.size(); ++n) {
        Image& im = out.images[n];
        require(im.plane_size() == plane, Err::ShapeMismatch, "images disagree on shape");
        for (int c = 0; c < im.channels; ++c) {
            const double* src = ds.images[n].plane(c);
            double* dst = im.plane(c);
            for (size_t i = 0; i < plane; ++i) dst[i] = src[perm[i]];
        }
    }
    out.provenance["pixel_permutation_seed"] = std::to_string(seed);
    return out;
}

} // namespace orderness
