// Dataset ingestion and snapshots.
//
// Reads IDX image/label files (plain or gzip) and CIFAR-10 binary batches;
// writes datasets back out as IDX plus a JSON provenance sidecar. Pixel
// bytes are scaled by 1/255; snapshot round-trips are bit-exact (ubyte data
// stays ubyte, anything else is stored as big-endian float64 IDX).
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "orderness/csv.hpp"
#include "orderness/dataset.hpp"
#include "orderness/errors.hpp"

namespace orderness {

namespace detail {

inline std::vector<uint8_t> read_file_maybe_gz(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), Err::IoError, "no such file: " + path.string());
    gzFile f = gzopen(path.string().c_str(), "rb");
    require(f != nullptr, Err::IoError, "cannot open " + path.string());
    std::vector<uint8_t> out;
    uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
    bool ok = (n == 0);
    gzclose(f);
    require(ok, Err::IoError, "read error in " + path.string());
    return out;
}

struct ByteReader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;
    std::string name;

    uint32_t be32() {
        require(pos + 4 <= bytes.size(), Err::TruncatedFile, name + " ends inside a header");
        uint32_t v = (uint32_t(bytes[pos]) << 24) | (uint32_t(bytes[pos + 1]) << 16) |
                     (uint32_t(bytes[pos + 2]) << 8) | uint32_t(bytes[pos + 3]);
        pos += 4;
        return v;
    }

    double be_f64() {
        require(pos + 8 <= bytes.size(), Err::TruncatedFile, name + " ends inside the data");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[pos + i];
        pos += 8;
        return std::bit_cast<double>(v);
    }

    uint8_t u8() {
        require(pos < bytes.size(), Err::TruncatedFile, name + " ends inside the data");
        return bytes[pos++];
    }

    size_t remaining() const { return bytes.size() - pos; }
};

inline void append_be32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

inline void append_be_f64(std::string& out, double d) {
    auto v = std::bit_cast<uint64_t>(d);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

// True when v is exactly k/255 for an integer k in [0,255].
inline bool is_ubyte_exact(double v) {
    if (v < 0.0 || v > 1.0) return false;
    double k = std::round(v * 255.0);
    return k / 255.0 == v;
}

} // namespace detail

// IDX magic numbers: 0x0000'TT'DD with TT the type code and DD the rank.
inline constexpr uint32_t kIdxImagesUbyte3 = 0x00000803;
inline constexpr uint32_t kIdxImagesUbyte4 = 0x00000804;
inline constexpr uint32_t kIdxImagesF64_3 = 0x00000E03;
inline constexpr uint32_t kIdxImagesF64_4 = 0x00000E04;
inline constexpr uint32_t kIdxLabels = 0x00000801;

// Reads an IDX image tensor: rank 3 [n,h,w] or rank 4 [n,c,h,w], ubyte
// (scaled by 1/255) or big-endian float64 (taken verbatim).
inline std::vector<Image> read_idx_images(const std::filesystem::path& path) {
    auto bytes = detail::read_file_maybe_gz(path);
    detail::ByteReader rd{bytes, 0, path.filename().string()};
    uint32_t magic = rd.be32();
    bool f64 = (magic == kIdxImagesF64_3 || magic == kIdxImagesF64_4);
    bool rank4 = (magic == kIdxImagesUbyte4 || magic == kIdxImagesF64_4);
    require(magic == kIdxImagesUbyte3 || f64 || rank4, Err::BadMagic,
            rd.name + ": magic " + std::to_string(magic) + " is not an image tensor");
    uint32_t n = rd.be32();
    uint32_t c = rank4 ? rd.be32() : 1;
    uint32_t h = rd.be32();
    uint32_t w = rd.be32();
    require(n > 0 && c > 0 && h > 0 && w > 0, Err::TruncatedFile,
            rd.name + ": zero-sized dimension");
    size_t per_value = f64 ? 8 : 1;
    size_t need = static_cast<size_t>(n) * c * h * w * per_value;
    require(rd.remaining() == need, Err::TruncatedFile,
            rd.name + ": expected " + std::to_string(need) + " data bytes, found " +
                std::to_string(rd.remaining()));
    std::vector<Image> images;
    images.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        Image im(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
        for (double& v : im.values) v = f64 ? rd.be_f64() : rd.u8() / 255.0;
        images.push_back(std::move(im));
    }
    return images;
}

inline std::vector<int> read_idx_labels(const std::filesystem::path& path) {
    auto bytes = detail::read_file_maybe_gz(path);
    detail::ByteReader rd{bytes, 0, path.filename().string()};
    uint32_t magic = rd.be32();
    require(magic == kIdxLabels, Err::BadMagic,
            rd.name + ": magic " + std::to_string(magic) + " is not a label vector");
    uint32_t n = rd.be32();
    require(rd.remaining() == n, Err::TruncatedFile,
            rd.name + ": expected " + std::to_string(n) + " label bytes, found " +
                std::to_string(rd.remaining()));
    std::vector<int> labels;
    labels.reserve(n);
    for (uint32_t i = 0; i < n; ++i) labels.push_back(rd.u8());
    return labels;
}

inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    Dataset ds;
    ds.images = read_idx_images(images_path);
    ds.labels = read_idx_labels(labels_path);
    require(ds.images.size() == ds.labels.size(), Err::CountMismatch,
            std::to_string(ds.images.size()) + " images vs " + std::to_string(ds.labels.size()) +
                " labels");
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = max_label + 1;
    ds.provenance["source"] = images_path.filename().string();
    ds.validate();
    return ds;
}

// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar
// RGB bytes (each plane 32x32 row-major).
inline Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
    require(!batch_paths.empty(), Err::EmptyInput, "no CIFAR batch files given");
    constexpr size_t kRecord = 3073;
    Dataset ds;
    ds.num_classes = 10;
    for (const auto& path : batch_paths) {
        auto bytes = detail::read_file_maybe_gz(path);
        require(bytes.size() % kRecord == 0 && !bytes.empty(), Err::TruncatedFile,
                path.filename().string() + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of 3073");
        size_t n = bytes.size() / kRecord;
        for (size_t i = 0; i < n; ++i) {
            const uint8_t* rec = bytes.data() + i * kRecord;
            int label = rec[0];
            require(label <= 9, Err::LabelOutOfRange,
                    path.filename().string() + ": label " + std::to_string(label));
            Image im(3, 32, 32);
            for (size_t j = 0; j < 3072; ++j) im.values[j] = rec[1 + j] / 255.0;
            ds.images.push_back(std::move(im));
            ds.labels.push_back(label);
        }
    }
    ds.provenance["source"] = batch_paths[0].filename().string();
    ds.validate();
    return ds;
}

// ---- snapshots ---------------------------------------------------------

// Writes dir/images.idx, dir/labels.idx and dir/provenance.json. Images go
// out as ubyte when every value is exactly k/255, else as float64.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    require(!ds.images.empty(), Err::EmptyInput, "refusing to write an empty dataset");
    std::filesystem::create_directories(dir);

    bool ubyte = true;
    for (const Image& im : ds.images) {
        for (double v : im.values)
            if (!detail::is_ubyte_exact(v)) {
                ubyte = false;
                break;
            }
        if (!ubyte) break;
    }
    const Image& first = ds.images[0];
    bool rank4 = first.channels > 1;

    std::string img;
    detail::append_be32(img, ubyte ? (rank4 ? kIdxImagesUbyte4 : kIdxImagesUbyte3)
                                   : (rank4 ? kIdxImagesF64_4 : kIdxImagesF64_3));
    detail::append_be32(img, static_cast<uint32_t>(ds.images.size()));
    if (rank4) detail::append_be32(img, static_cast<uint32_t>(first.channels));
    detail::append_be32(img, static_cast<uint32_t>(first.height));
    detail::append_be32(img, static_cast<uint32_t>(first.width));
    for (const Image& im : ds.images) {
        for (double v : im.values) {
            if (ubyte)
                img.push_back(static_cast<char>(static_cast<uint8_t>(std::lround(v * 255.0))));
            else
                detail::append_be_f64(img, v);
        }
    }
    atomic_write_file(dir / "images.idx", img);

    std::string lab;
    detail::append_be32(lab, kIdxLabels);
    detail::append_be32(lab, static_cast<uint32_t>(ds.labels.size()));
    for (int l : ds.labels) {
        require(l >= 0 && l <= 255, Err::LabelOutOfRange, "label does not fit in a byte");
        lab.push_back(static_cast<char>(static_cast<uint8_t>(l)));
    }
    atomic_write_file(dir / "labels.idx", lab);

    nlohmann::json prov;
    for (const auto& [k, v] : ds.provenance) prov[k] = v;
    prov["num_classes"] = ds.num_classes;
    atomic_write_file(dir / "provenance.json", prov.dump(2) + "\n");
}

// Loads a directory in any supported layout: an artifact snapshot
// (images.idx/labels.idx), original MNIST-style IDX names (train-* preferred
// over t10k-*, .gz accepted), or CIFAR-10 batches.
inline Dataset load_dataset_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    require(fs::exists(dir), Err::IoError, "no such path: " + dir.string());
    auto pick = [&](const std::string& base) -> fs::path {
        if (fs::exists(dir / base)) return dir / base;
        if (fs::exists(dir / (base + ".gz"))) return dir / (base + ".gz");
        return {};
    };

    if (auto img = pick("images.idx"); !img.empty()) {
        Dataset ds = load_idx(img, pick("labels.idx"));
        if (fs::exists(dir / "provenance.json")) {
            std::ifstream in(dir / "provenance.json");
            nlohmann::json prov = nlohmann::json::parse(in);
            for (auto& [k, v] : prov.items()) {
                if (k == "num_classes")
                    ds.num_classes = v.get<int>();
                else if (v.is_string())
                    ds.provenance[k] = v.get<std::string>();
            }
            ds.validate();
        }
        return ds;
    }
    for (const char* prefix : {"train", "t10k"}) {
        auto img = pick(std::string(prefix) + "-images-idx3-ubyte");
        auto lab = pick(std::string(prefix) + "-labels-idx1-ubyte");
        if (!img.empty() && !lab.empty()) return load_idx(img, lab);
    }
    std::vector<fs::path> batches;
    for (int i = 1; i <= 5; ++i) {
        auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
        if (fs::exists(p)) batches.push_back(p);
    }
    if (!batches.empty()) return load_cifar10(batches);
    raise(Err::IoError, "no recognizable dataset in " + dir.string());
}

} // namespace orderness
