// Labeled image collections with deterministic subsetting and splits.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orderness/errors.hpp"
#include "orderness/grid.hpp"
#include "orderness/metric.hpp"
#include "orderness/rng.hpp"

namespace orderness {

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    int num_classes = 0;
    std::map<std::string, std::string> provenance;

    size_t size() const { return images.size(); }

    void validate() const {
        require(images.size() == labels.size(), Err::CountMismatch,
                "image/label counts differ");
        require(num_classes >= 1, Err::InvalidArgument, "num_classes must be positive");
        if (images.empty()) return;
        int c = images[0].channels, h = images[0].height, w = images[0].width;
        for (const Image& im : images)
            require(im.channels == c && im.height == h && im.width == w, Err::ShapeMismatch,
                    "images disagree on shape");
        for (int l : labels)
            require(l >= 0 && l < num_classes, Err::LabelOutOfRange,
                    "label " + std::to_string(l) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
};

namespace detail {

inline std::vector<std::vector<size_t>> indices_by_class(const Dataset& ds) {
    std::vector<std::vector<size_t>> groups(ds.num_classes);
    for (size_t i = 0; i < ds.labels.size(); ++i) groups[ds.labels[i]].push_back(i);
    return groups;
}

inline Dataset gather(const Dataset& ds, const std::vector<size_t>& idx) {
    Dataset out;
    out.num_classes = ds.num_classes;
    out.provenance = ds.provenance;
    out.images.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (size_t i : idx) {
        out.images.push_back(ds.images[i]);
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

// Per-class quotas: n split as evenly as floor/remainder allows over classes
// with examples, spilling deterministically when a class runs short.
inline std::vector<size_t> stratified_quotas(const std::vector<std::vector<size_t>>& groups,
                                             size_t n) {
    size_t present = 0;
    for (const auto& g : groups)
        if (!g.empty()) ++present;
    std::vector<size_t> quota(groups.size(), 0);
    if (present == 0) return quota;
    size_t base = n / present, rem = n % present;
    size_t seen = 0;
    for (size_t c = 0; c < groups.size(); ++c) {
        if (groups[c].empty()) continue;
        quota[c] = std::min(groups[c].size(), base + (seen < rem ? 1u : 0u));
        ++seen;
    }
    size_t assigned = 0;
    for (size_t q : quota) assigned += q;
    while (assigned < n) {
        bool progressed = false;
        for (size_t c = 0; c < groups.size() && assigned < n; ++c) {
            if (quota[c] < groups[c].size()) {
                ++quota[c];
                ++assigned;
                progressed = true;
            }
        }
        require(progressed, Err::SubsetTooLarge, "not enough examples to satisfy subset");
    }
    return quota;
}

} // namespace detail

// Seeded stratified sample of n examples without replacement; output order is
// itself a seeded shuffle so class blocks do not survive into batching.
inline Dataset take_subset(const Dataset& ds, size_t n, uint64_t seed) {
    require(n >= 1, Err::InvalidArgument, "subset size must be positive");
    require(n <= ds.size(), Err::SubsetTooLarge,
            "requested " + std::to_string(n) + " of " + std::to_string(ds.size()));
    auto groups = detail::indices_by_class(ds);
    for (size_t c = 0; c < groups.size(); ++c) {
        Rng rng(derive_seed(seed, {stream::kClass, static_cast<uint64_t>(c)}));
        rng.shuffle(groups[c]);
    }
    auto quota = detail::stratified_quotas(groups, n);
    std::vector<size_t> chosen;
    chosen.reserve(n);
    for (size_t c = 0; c < groups.size(); ++c)
        chosen.insert(chosen.end(), groups[c].begin(), groups[c].begin() + quota[c]);
    Rng order(derive_seed(seed, {stream::kOrder}));
    order.shuffle(chosen);
    Dataset out = detail::gather(ds, chosen);
    out.provenance["subset_n"] = std::to_string(n);
    out.provenance["subset_seed"] = std::to_string(seed);
    return out;
}

// Disjoint exhaustive stratified split; `fraction` is the train share.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, uint64_t seed) {
    require(fraction > 0.0 && fraction < 1.0, Err::InvalidArgument,
            "split fraction must lie in (0,1)");
    auto groups = detail::indices_by_class(ds);
    std::vector<size_t> train_idx, val_idx;
    for (size_t c = 0; c < groups.size(); ++c) {
        Rng rng(derive_seed(seed, {stream::kClass, static_cast<uint64_t>(c)}));
        rng.shuffle(groups[c]);
        auto n_train = static_cast<size_t>(fraction * static_cast<double>(groups[c].size()) + 0.5);
        n_train = std::min(n_train, groups[c].size());
        train_idx.insert(train_idx.end(), groups[c].begin(), groups[c].begin() + n_train);
        val_idx.insert(val_idx.end(), groups[c].begin() + n_train, groups[c].end());
    }
    require(!train_idx.empty() && !val_idx.empty(), Err::DegenerateSplit,
            "split leaves one side empty");
    Rng t_order(derive_seed(seed, {stream::kOrder, 0}));
    t_order.shuffle(train_idx);
    Rng v_order(derive_seed(seed, {stream::kOrder, 1}));
    v_order.shuffle(val_idx);
    auto train = detail::gather(ds, train_idx);
    auto val = detail::gather(ds, val_idx);
    train.provenance["split"] = "train";
    val.provenance["split"] = "val";
    train.provenance["split_seed"] = val.provenance["split_seed"] = std::to_string(seed);
    return {std::move(train), std::move(val)};
}

// Multi-scale profile of a dataset: per scale, per-channel orderness averaged
// over channels (degenerate channels excluded), d_one/d_two averaged the same
// way and n_triples summed. Substream path is (scale, channel).
inline OrdernessProfile dataset_orderness_multiscale(const Dataset& ds,
                                                     std::span<const int> scales, size_t count,
                                                     uint64_t seed) {
    require(!ds.images.empty(), Err::EmptyInput, "dataset has no images");
    for (size_t i = 0; i < scales.size(); ++i) {
        require(scales[i] >= 1, Err::InvalidArgument, "scales must be positive");
        require(i == 0 || scales[i] > scales[i - 1], Err::InvalidArgument,
                "scales must be strictly increasing");
    }
    int channels = ds.images[0].channels;
    OrdernessProfile profile;
    profile.seed = seed;
    profile.triples_requested = count;
    for (int a : scales) {
        uint64_t scale_seed = derive_seed(seed, {stream::kScale, static_cast<uint64_t>(a)});
        double so_sum = 0.0, d1_sum = 0.0, d2_sum = 0.0;
        size_t n_defined = 0, n_triples = 0;
        try {
            for (int c = 0; c < channels; ++c) {
                std::vector<Grid2D> owned;
                std::vector<GridView> views;
                views.reserve(ds.images.size());
                if (a == 1) {
                    for (const Image& im : ds.images) views.push_back(im.channel_view(c));
                } else {
                    owned.reserve(ds.images.size());
                    for (const Image& im : ds.images)
                        owned.push_back(downsample_mean(im.channel_view(c), a));
                    views.assign(owned.begin(), owned.end());
                }
                uint64_t sub = derive_seed(scale_seed, {stream::kChannel, static_cast<uint64_t>(c)});
                try {
                    auto r = orderness_scale1(std::span<const GridView>(views), count, sub);
                    so_sum += r.so;
                    d1_sum += r.stats.d_one;
                    d2_sum += r.stats.d_two;
                    n_triples += r.stats.n_triples;
                    ++n_defined;
                } catch (const Error& err) {
                    if (err.code() != Err::DegenerateDenominator) throw;
                }
            }
            require(n_defined > 0, Err::AllChannelsDegenerate,
                    "every channel degenerate");
        } catch (const Error& err) {
            raise(err.code(), std::string("at scale ") + std::to_string(a) + ": " + err.what());
        }
        OrdernessEntry e;
        e.scale = a;
        e.stats.d_one = d1_sum / static_cast<double>(n_defined);
        e.stats.d_two = d2_sum / static_cast<double>(n_defined);
        e.stats.n_triples = n_triples;
        e.so = so_sum / static_cast<double>(n_defined);
        profile.entries.push_back(e);
    }
    return profile;
}

} // namespace orderness
