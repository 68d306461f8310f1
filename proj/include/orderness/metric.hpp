// Multi-scale spatial orderness of 2D grids.
//
// The statistic compares squared value differences at one hop and two hops
// along grid axes: so = E[(x(p)-x(r))^2] / E[(x(p)-x(q))^2] - 1 for triples
// p, q = p+d, r = p+2d with d a unit axis step. Diffusion-like data gives
// so ~ 1, spatially unordered data gives so ~ 0. Scales are realized by
// non-overlapping a-by-a mean downsampling before measuring.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orderness/csv.hpp"
#include "orderness/errors.hpp"
#include "orderness/grid.hpp"
#include "orderness/rng.hpp"

namespace orderness {

struct Coord {
    int row = 0;
    int col = 0;
    bool operator==(const Coord&) const = default;
};

// Collinear two-hop triple: q = p + d, r = p + 2d for a unit axis step d.
struct TwoHopTriple {
    size_t grid_index = 0;
    Coord p, q, r;
};

struct HopStats {
    double d_one = 0.0;   // mean squared one-hop difference
    double d_two = 0.0;   // mean squared two-hop difference
    size_t n_triples = 0;
};

struct OrdernessEntry {
    int scale = 1;
    double so = 0.0;
    HopStats stats;
};

struct OrdernessProfile {
    std::vector<OrdernessEntry> entries;
    uint64_t seed = 0;
    size_t triples_requested = 0;
};

namespace detail {

// Valid (p, direction) placements in one grid. Horizontal placements come
// first (+col then -col), then vertical (+row then -row); the decode order
// is frozen since sampling indexes into it.
struct PlacementCount {
    size_t horiz = 0; // per horizontal direction
    size_t vert = 0;  // per vertical direction
    size_t total() const { return 2 * horiz + 2 * vert; }
};

inline PlacementCount count_placements(const GridView& g) {
    PlacementCount c;
    if (g.width >= 3) c.horiz = static_cast<size_t>(g.height) * (g.width - 2);
    if (g.height >= 3) c.vert = static_cast<size_t>(g.width) * (g.height - 2);
    return c;
}

inline TwoHopTriple decode_placement(const GridView& g, size_t grid_index, size_t u) {
    PlacementCount c = count_placements(g);
    TwoHopTriple t;
    t.grid_index = grid_index;
    if (u < c.horiz) { // d = (0, +1)
        int row = static_cast<int>(u / (g.width - 2));
        int col = static_cast<int>(u % (g.width - 2));
        t.p = {row, col};
        t.q = {row, col + 1};
        t.r = {row, col + 2};
        return t;
    }
    u -= c.horiz;
    if (u < c.horiz) { // d = (0, -1)
        int row = static_cast<int>(u / (g.width - 2));
        int col = static_cast<int>(u % (g.width - 2)) + 2;
        t.p = {row, col};
        t.q = {row, col - 1};
        t.r = {row, col - 2};
        return t;
    }
    u -= c.horiz;
    if (u < c.vert) { // d = (+1, 0)
        int row = static_cast<int>(u / g.width);
        int col = static_cast<int>(u % g.width);
        t.p = {row, col};
        t.q = {row + 1, col};
        t.r = {row + 2, col};
        return t;
    }
    u -= c.vert; // d = (-1, 0)
    int row = static_cast<int>(u / g.width) + 2;
    int col = static_cast<int>(u % g.width);
    t.p = {row, col};
    t.q = {row - 1, col};
    t.r = {row - 2, col};
    return t;
}

} // namespace detail

// Uniform seeded sample of two-hop triples, pooled over all grids that admit
// at least one placement: grid first, then placement within the grid.
inline std::vector<TwoHopTriple> sample_triples(std::span<const GridView> grids, size_t count,
                                                uint64_t seed) {
    require(!grids.empty(), Err::EmptyInput, "no grids to sample triples from");
    require(count >= 1, Err::InvalidArgument, "triple count must be positive");

    std::vector<size_t> eligible;
    std::vector<size_t> totals;
    eligible.reserve(grids.size());
    for (size_t i = 0; i < grids.size(); ++i) {
        size_t n = detail::count_placements(grids[i]).total();
        if (n > 0) {
            eligible.push_back(i);
            totals.push_back(n);
        }
    }
    require(!eligible.empty(), Err::GridTooSmall,
            "no grid admits a two-hop triple (need extent >= 3 on some axis)");

    Rng rng(seed);
    std::vector<TwoHopTriple> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        size_t which = rng.index(eligible.size());
        size_t u = rng.below(totals[which]);
        out.push_back(detail::decode_placement(grids[eligible[which]], eligible[which], u));
    }
    return out;
}

// Every valid triple of one grid, in decode order.
inline std::vector<TwoHopTriple> enumerate_triples(const GridView& g, size_t grid_index = 0) {
    size_t n = detail::count_placements(g).total();
    std::vector<TwoHopTriple> out;
    out.reserve(n);
    for (size_t u = 0; u < n; ++u) out.push_back(detail::decode_placement(g, grid_index, u));
    return out;
}

inline HopStats hop_stats(std::span<const GridView> grids, std::span<const TwoHopTriple> triples) {
    require(!triples.empty(), Err::EmptyInput, "no triples given");
    double sum_one = 0.0, sum_two = 0.0;
    for (const TwoHopTriple& t : triples) {
        const GridView& g = grids[t.grid_index];
        double vp = g.at(t.p.row, t.p.col);
        double d1 = vp - g.at(t.q.row, t.q.col);
        double d2 = vp - g.at(t.r.row, t.r.col);
        sum_one += d1 * d1;
        sum_two += d2 * d2;
    }
    HopStats s;
    s.n_triples = triples.size();
    s.d_one = sum_one / static_cast<double>(s.n_triples);
    s.d_two = sum_two / static_cast<double>(s.n_triples);
    return s;
}

inline double so_from_stats(const HopStats& s, const std::string& context) {
    require(s.d_one > 0.0, Err::DegenerateDenominator,
            "one-hop mean squared difference is zero (" + context + ")");
    return s.d_two / s.d_one - 1.0;
}

struct ScaleOneResult {
    double so = 0.0;
    HopStats stats;
};

inline ScaleOneResult orderness_scale1(std::span<const GridView> grids, size_t count,
                                       uint64_t seed) {
    auto triples = sample_triples(grids, count, seed);
    ScaleOneResult r;
    r.stats = hop_stats(grids, triples);
    r.so = so_from_stats(r.stats, "constant or near-constant grids");
    return r;
}

// a-by-a block means; rows/cols past a*floor(dim/a) are cropped.
inline Grid2D downsample_mean(const GridView& g, int a) {
    require(a >= 1, Err::InvalidArgument, "scale must be >= 1");
    int oh = g.height / a;
    int ow = g.width / a;
    require(oh >= 1 && ow >= 1, Err::ScaleTooLarge,
            "scale " + std::to_string(a) + " collapses a " + std::to_string(g.height) + "x" +
                std::to_string(g.width) + " grid to nothing");
    Grid2D out(oh, ow);
    double inv = 1.0 / (static_cast<double>(a) * a);
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double sum = 0.0;
            for (int dr = 0; dr < a; ++dr)
                for (int dc = 0; dc < a; ++dc) sum += g.at(r * a + dr, c * a + dc);
            out.at(r, c) = sum * inv;
        }
    }
    return out;
}

inline Grid2D downsample_mean(const Grid2D& g, int a) { return downsample_mean(GridView(g), a); }

// Per-scale orderness; scale a draws from substream (seed, scale-tag, a), so
// extending the scale list never changes existing entries.
inline OrdernessProfile orderness_multiscale(std::span<const GridView> grids,
                                             std::span<const int> scales, size_t count,
                                             uint64_t seed) {
    require(!grids.empty(), Err::EmptyInput, "no grids given");
    require(!scales.empty(), Err::InvalidArgument, "no scales given");
    for (size_t i = 0; i < scales.size(); ++i) {
        require(scales[i] >= 1, Err::InvalidArgument, "scales must be positive");
        require(i == 0 || scales[i] > scales[i - 1], Err::InvalidArgument,
                "scales must be strictly increasing");
    }

    OrdernessProfile profile;
    profile.seed = seed;
    profile.triples_requested = count;
    for (int a : scales) {
        uint64_t sub = derive_seed(seed, {stream::kScale, static_cast<uint64_t>(a)});
        try {
            OrdernessEntry e;
            e.scale = a;
            if (a == 1) {
                auto r = orderness_scale1(grids, count, sub);
                e.so = r.so;
                e.stats = r.stats;
            } else {
                std::vector<Grid2D> down;
                down.reserve(grids.size());
                for (const GridView& g : grids) down.push_back(downsample_mean(g, a));
                std::vector<GridView> views(down.begin(), down.end());
                auto r = orderness_scale1(views, count, sub);
                e.so = r.so;
                e.stats = r.stats;
            }
            profile.entries.push_back(e);
        } catch (const Error& err) {
            raise(err.code(), std::string("at scale ") + std::to_string(a) + ": " + err.what());
        }
    }
    return profile;
}

struct ChannelOrderness {
    int channel = 0;
    bool defined = false;
    double so = 0.0;
    HopStats stats;
};

struct StackOrderness {
    double mean_so = 0.0;
    std::vector<ChannelOrderness> channels;

    size_t defined_count() const {
        size_t n = 0;
        for (const auto& c : channels)
            if (c.defined) ++n;
        return n;
    }
};

// Scale-1 orderness per channel across a set of same-shape stacks, averaged
// over channels. Channels with a degenerate denominator (e.g. dead units)
// are excluded from the mean and flagged.
inline StackOrderness orderness_of_stack(std::span<const Image> stacks, size_t count,
                                         uint64_t seed) {
    require(!stacks.empty(), Err::EmptyInput, "no stacks given");
    int ch = stacks[0].channels, h = stacks[0].height, w = stacks[0].width;
    for (const Image& im : stacks)
        require(im.channels == ch && im.height == h && im.width == w, Err::ShapeMismatch,
                "stacks disagree on channel count or spatial dims");

    StackOrderness out;
    double sum = 0.0;
    for (int c = 0; c < ch; ++c) {
        std::vector<GridView> views;
        views.reserve(stacks.size());
        for (const Image& im : stacks) views.push_back(im.channel_view(c));
        uint64_t sub = derive_seed(seed, {stream::kChannel, static_cast<uint64_t>(c)});
        ChannelOrderness entry;
        entry.channel = c;
        try {
            auto r = orderness_scale1(views, count, sub);
            entry.defined = true;
            entry.so = r.so;
            entry.stats = r.stats;
            sum += r.so;
        } catch (const Error& err) {
            if (err.code() != Err::DegenerateDenominator) throw;
            entry.defined = false;
        }
        out.channels.push_back(entry);
    }
    size_t n = out.defined_count();
    require(n > 0, Err::AllChannelsDegenerate, "every channel has a degenerate denominator");
    out.mean_so = sum / static_cast<double>(n);
    return out;
}

// ---- serialization ----------------------------------------------------

inline std::string profile_to_csv(const OrdernessProfile& p) {
    std::string out = "scale,so,d_one,d_two,n_triples,seed\n";
    for (const auto& e : p.entries) {
        out += std::to_string(e.scale);
        out += ',';
        out += format_real(e.so);
        out += ',';
        out += format_real(e.stats.d_one);
        out += ',';
        out += format_real(e.stats.d_two);
        out += ',';
        out += std::to_string(e.stats.n_triples);
        out += ',';
        out += format_u64(p.seed);
        out += '\n';
    }
    return out;
}

inline nlohmann::json profile_to_json(const OrdernessProfile& p) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : p.entries) {
        entries.push_back({{"scale", e.scale},
                           {"so", e.so},
                           {"d_one", e.stats.d_one},
                           {"d_two", e.stats.d_two},
                           {"n_triples", e.stats.n_triples}});
    }
    return nlohmann::json{
        {"seed", p.seed}, {"triples_requested", p.triples_requested}, {"entries", entries}};
}

// ---- convenience overloads over owned grids ---------------------------

inline std::vector<GridView> as_views(const std::vector<Grid2D>& grids) {
    return std::vector<GridView>(grids.begin(), grids.end());
}

inline std::vector<TwoHopTriple> sample_triples(const std::vector<Grid2D>& grids, size_t count,
                                                uint64_t seed) {
    auto v = as_views(grids);
    return sample_triples(std::span<const GridView>(v), count, seed);
}

inline HopStats hop_stats(const std::vector<Grid2D>& grids,
                          std::span<const TwoHopTriple> triples) {
    auto v = as_views(grids);
    return hop_stats(std::span<const GridView>(v), triples);
}

inline ScaleOneResult orderness_scale1(const std::vector<Grid2D>& grids, size_t count,
                                       uint64_t seed) {
    auto v = as_views(grids);
    return orderness_scale1(std::span<const GridView>(v), count, seed);
}

inline OrdernessProfile orderness_multiscale(const std::vector<Grid2D>& grids,
                                             const std::vector<int>& scales, size_t count,
                                             uint64_t seed) {
    auto v = as_views(grids);
    return orderness_multiscale(std::span<const GridView>(v), std::span<const int>(scales), count,
                                seed);
}

} // namespace orderness
