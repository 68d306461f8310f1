// Random block swapping: destroys spatial order at scales >= the block size
// while preserving the pixel multiset exactly.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "orderness/dataset.hpp"
#include "orderness/errors.hpp"
#include "orderness/grid.hpp"
#include "orderness/rng.hpp"

namespace orderness {

struct SwapSpec {
    int block_size = 1;   // k, in pixels
    int n_swaps = 0;      // Ns, swap iterations
    uint64_t seed = 0;
};

// Swaps Ns uniformly chosen pairs of distinct k-by-k blocks. Blocks tile from
// the top-left; the bottom/right remainder (dims mod k) is never touched.
// All channels move together with the same block pair.
inline Image block_swap(const Image& img, const SwapSpec& spec) {
    require(spec.block_size >= 1, Err::InvalidArgument, "block size must be positive");
    require(spec.n_swaps >= 0, Err::InvalidArgument, "swap count must be non-negative");
    Image out = img;
    if (spec.n_swaps == 0) return out;

    int k = spec.block_size;
    int blocks_h = img.height / k;
    int blocks_w = img.width / k;
    size_t n_blocks = static_cast<size_t>(blocks_h) * blocks_w;
    require(n_blocks >= 2, Err::TooFewBlocks,
            std::to_string(img.height) + "x" + std::to_string(img.width) + " image yields " +
                std::to_string(n_blocks) + " block(s) of size " + std::to_string(k));

    Rng rng(spec.seed);
    for (int it = 0; it < spec.n_swaps; ++it) {
        size_t i = rng.index(n_blocks);
        size_t j = rng.index(n_blocks - 1);
        if (j >= i) ++j; // distinct pair; a self-swap would silently be a no-op
        int ri = static_cast<int>(i / blocks_w) * k, ci = static_cast<int>(i % blocks_w) * k;
        int rj = static_cast<int>(j / blocks_w) * k, cj = static_cast<int>(j % blocks_w) * k;
        for (int c = 0; c < out.channels; ++c) {
            for (int dr = 0; dr < k; ++dr) {
                double* a = out.plane(c) + static_cast<size_t>(ri + dr) * out.width + ci;
                double* b = out.plane(c) + static_cast<size_t>(rj + dr) * out.width + cj;
                std::swap_ranges(a, a + k, b);
            }
        }
    }
    return out;
}

inline Grid2D block_swap(const Grid2D& grid, const SwapSpec& spec) {
    Image swapped = block_swap(Image::from_grid(grid), spec);
    return swapped.channel_copy(0);
}

// Applies block_swap to every image with an independent per-image substream;
// labels, ordering and shapes are untouched.
inline Dataset swap_dataset(const Dataset& ds, const SwapSpec& spec) {
    Dataset out;
    out.labels = ds.labels;
    out.num_classes = ds.num_classes;
    out.provenance = ds.provenance;
    out.images.reserve(ds.images.size());
    for (size_t i = 0; i < ds.images.size(); ++i) {
        SwapSpec sub = spec;
        sub.seed = derive_seed(spec.seed, {stream::kImage, static_cast<uint64_t>(i)});
        try {
            out.images.push_back(block_swap(ds.images[i], sub));
        } catch (const Error& err) {
            raise(err.code(), "image " + std::to_string(i) + ": " + err.what());
        }
    }
    out.provenance["swap_k"] = std::to_string(spec.block_size);
    out.provenance["swap_ns"] = std::to_string(spec.n_swaps);
    out.provenance["swap_seed"] = std::to_string(spec.seed);
    return out;
}

} // namespace orderness
