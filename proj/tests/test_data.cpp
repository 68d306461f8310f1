#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <zlib.h>

#include "orderness/fixtures.hpp"
#include "orderness/idx.hpp"

using namespace orderness;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("orderness_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void put_be32(std::string& s, uint32_t v) {
    s.push_back(char((v >> 24) & 0xFF));
    s.push_back(char((v >> 16) & 0xFF));
    s.push_back(char((v >> 8) & 0xFF));
    s.push_back(char(v & 0xFF));
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Hand-built two-image IDX fixture: 2x3 images with known byte values.
std::string idx_images_fixture() {
    std::string s;
    put_be32(s, 0x00000803);
    put_be32(s, 2); // images
    put_be32(s, 2); // rows
    put_be32(s, 3); // cols
    for (uint8_t b : {0, 51, 102, 153, 204, 255}) s.push_back(char(b));
    for (uint8_t b : {255, 0, 255, 0, 255, 0}) s.push_back(char(b));
    return s;
}

std::string idx_labels_fixture(std::initializer_list<uint8_t> labels) {
    std::string s;
    put_be32(s, 0x00000801);
    put_be32(s, static_cast<uint32_t>(labels.size()));
    for (uint8_t b : labels) s.push_back(char(b));
    return s;
}

} // namespace

TEST_CASE("hand-built IDX fixture loads with exact pixel values") {
    auto dir = temp_dir("idx");
    write_bytes(dir / "img.idx", idx_images_fixture());
    write_bytes(dir / "lab.idx", idx_labels_fixture({7, 2}));
    auto ds = load_idx(dir / "img.idx", dir / "lab.idx");
    REQUIRE(ds.size() == 2);
    CHECK(ds.images[0].height == 2);
    CHECK(ds.images[0].width == 3);
    CHECK(ds.images[0].channels == 1);
    CHECK(ds.labels == std::vector<int>{7, 2});
    CHECK(ds.num_classes == 8);
    CHECK(ds.images[0].values[0] == 0.0);
    CHECK(ds.images[0].values[1] == 51.0 / 255.0);
    CHECK(ds.images[0].values[5] == 1.0);
    CHECK(ds.images[1].values[0] == 1.0);
    CHECK(ds.images[1].values[1] == 0.0);
}

TEST_CASE("gzip IDX files load transparently") {
    auto dir = temp_dir("idxgz");
    auto raw = idx_images_fixture();
    gzFile f = gzopen((dir / "img.idx.gz").string().c_str(), "wb");
    gzwrite(f, raw.data(), static_cast<unsigned>(raw.size()));
    gzclose(f);
    write_bytes(dir / "lab.idx", idx_labels_fixture({1, 0}));
    auto ds = load_idx(dir / "img.idx.gz", dir / "lab.idx");
    REQUIRE(ds.size() == 2);
    CHECK(ds.images[0].values[1] == 51.0 / 255.0);
}

TEST_CASE("IDX error paths") {
    auto dir = temp_dir("idxerr");
    // label-file magic where an image file is expected
    write_bytes(dir / "bad.idx", idx_labels_fixture({1, 2}));
    CHECK_THROWS_MATCHES(read_idx_images(dir / "bad.idx"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::BadMagic;
                         }));
    // image magic on a label read
    write_bytes(dir / "img.idx", idx_images_fixture());
    CHECK_THROWS_MATCHES(read_idx_labels(dir / "img.idx"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::BadMagic;
                         }));
    // truncated data section
    auto trunc = idx_images_fixture();
    trunc.resize(trunc.size() - 3);
    write_bytes(dir / "trunc.idx", trunc);
    CHECK_THROWS_MATCHES(read_idx_images(dir / "trunc.idx"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::TruncatedFile;
                         }));
    // image/label count mismatch
    write_bytes(dir / "lab3.idx", idx_labels_fixture({1, 2, 3}));
    CHECK_THROWS_MATCHES(load_idx(dir / "img.idx", dir / "lab3.idx"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::CountMismatch;
                         }));
}

TEST_CASE("synthetic one-record CIFAR batch round-trips exactly") {
    auto dir = temp_dir("cifar");
    std::string rec;
    rec.push_back(char(9));
    for (int i = 0; i < 3072; ++i) rec.push_back(char(i % 256));
    write_bytes(dir / "data_batch_1.bin", rec);
    auto ds = load_cifar10({dir / "data_batch_1.bin"});
    REQUIRE(ds.size() == 1);
    CHECK(ds.labels[0] == 9);
    CHECK(ds.num_classes == 10);
    CHECK(ds.images[0].channels == 3);
    CHECK(ds.images[0].height == 32);
    CHECK(ds.images[0].width == 32);
    for (int i = 0; i < 3072; ++i) CHECK(ds.images[0].values[i] == (i % 256) / 255.0);
}

TEST_CASE("CIFAR error paths") {
    auto dir = temp_dir("cifarerr");
    std::string bad(3072, '\0'); // one byte short of a record
    write_bytes(dir / "data_batch_1.bin", bad);
    CHECK_THROWS_MATCHES(load_cifar10({dir / "data_batch_1.bin"}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::TruncatedFile;
                         }));
    std::string wild(3073, '\0');
    wild[0] = char(11);
    write_bytes(dir / "data_batch_2.bin", wild);
    CHECK_THROWS_MATCHES(load_cifar10({dir / "data_batch_2.bin"}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::LabelOutOfRange;
                         }));
}

namespace {

Dataset labeled_fixture(size_t n, int classes, uint64_t seed) {
    FixtureSpec fs;
    fs.kind = FixtureKind::Iid;
    fs.count = n;
    fs.height = fs.width = 8;
    fs.seed = seed;
    auto ds = generate_fixture(fs);
    ds.num_classes = classes;
    for (size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % classes);
    return ds;
}

} // namespace

TEST_CASE("stratified subset balances classes and is deterministic") {
    auto ds = labeled_fixture(500, 10, 21);
    auto sub = take_subset(ds, 100, 77);
    REQUIRE(sub.size() == 100);
    std::map<int, int> counts;
    for (int l : sub.labels) ++counts[l];
    for (const auto& [label, count] : counts) CHECK(count == 10);

    auto again = take_subset(ds, 100, 77);
    for (size_t i = 0; i < sub.size(); ++i) {
        CHECK(sub.labels[i] == again.labels[i]);
        CHECK(sub.images[i].values == again.images[i].values);
    }
    // remainder spread: counts differ by at most one
    auto sub2 = take_subset(ds, 105, 3);
    counts.clear();
    for (int l : sub2.labels) ++counts[l];
    int lo = 1 << 30, hi = 0;
    for (const auto& [label, count] : counts) {
        lo = std::min(lo, count);
        hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("subset of the full size is a permutation") {
    auto ds = labeled_fixture(60, 10, 4);
    auto sub = take_subset(ds, 60, 5);
    std::map<int, int> counts;
    for (int l : sub.labels) ++counts[l];
    for (const auto& [label, count] : counts) CHECK(count == 6);
    CHECK_THROWS_MATCHES(take_subset(ds, 61, 5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::SubsetTooLarge;
                         }));
}

TEST_CASE("split is disjoint, exhaustive, stratified and deterministic") {
    auto ds = labeled_fixture(200, 10, 9);
    // tag each image with a unique value so identity can be tracked
    for (size_t i = 0; i < ds.size(); ++i) ds.images[i].values[0] = static_cast<double>(i);
    auto [train, val] = split(ds, 0.9, 13);
    CHECK(train.size() == 180);
    CHECK(val.size() == 20);
    std::set<double> seen;
    for (const auto& im : train.images) seen.insert(im.values[0]);
    for (const auto& im : val.images) seen.insert(im.values[0]);
    CHECK(seen.size() == 200);
    std::map<int, int> val_counts;
    for (int l : val.labels) ++val_counts[l];
    for (const auto& [label, count] : val_counts) CHECK(count == 2);

    auto [train2, val2] = split(ds, 0.9, 13);
    CHECK(train2.labels == train.labels);
    CHECK(val2.labels == val.labels);

    CHECK_THROWS_AS(split(ds, 0.0, 1), Error);
    Dataset tiny = labeled_fixture(1, 1, 2);
    CHECK_THROWS_MATCHES(split(tiny, 0.5, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::DegenerateSplit;
                         }));
}

TEST_CASE("snapshot round-trip is bit-exact for ubyte-scaled data") {
    auto dir = temp_dir("snap_ubyte");
    Dataset ds;
    ds.num_classes = 3;
    Rng rng(5);
    for (int i = 0; i < 7; ++i) {
        Image im(1, 5, 4);
        for (double& v : im.values) v = static_cast<double>(rng.index(256)) / 255.0;
        ds.images.push_back(im);
        ds.labels.push_back(static_cast<int>(rng.index(3)));
    }
    ds.provenance["source"] = "unit";
    save_dataset(ds, dir);
    auto back = load_dataset_dir(dir);
    REQUIRE(back.size() == ds.size());
    CHECK(back.num_classes == 3);
    CHECK(back.labels == ds.labels);
    for (size_t i = 0; i < ds.size(); ++i) CHECK(back.images[i].values == ds.images[i].values);
    CHECK(back.provenance.at("source") == "unit");
}

TEST_CASE("snapshot round-trip is bit-exact for arbitrary real data") {
    auto dir = temp_dir("snap_f64");
    FixtureSpec fs;
    fs.kind = FixtureKind::Diffusion;
    fs.count = 6;
    fs.height = fs.width = 9;
    fs.sigma = 0.25;
    fs.seed = 8;
    auto ds = generate_fixture(fs);
    save_dataset(ds, dir);
    auto back = load_dataset_dir(dir);
    REQUIRE(back.size() == ds.size());
    for (size_t i = 0; i < ds.size(); ++i) CHECK(back.images[i].values == ds.images[i].values);
}

TEST_CASE("multi-channel snapshots keep the channel layout") {
    auto dir = temp_dir("snap_rgb");
    Dataset ds;
    ds.num_classes = 2;
    Rng rng(6);
    for (int i = 0; i < 3; ++i) {
        Image im(3, 4, 4);
        for (double& v : im.values) v = rng.uniform();
        ds.images.push_back(im);
        ds.labels.push_back(i % 2);
    }
    save_dataset(ds, dir);
    auto back = load_dataset_dir(dir);
    REQUIRE(back.images[0].channels == 3);
    for (size_t i = 0; i < ds.size(); ++i) CHECK(back.images[i].values == ds.images[i].values);
}

TEST_CASE("loading an empty or unknown directory fails cleanly") {
    auto dir = temp_dir("empty");
    CHECK_THROWS_MATCHES(load_dataset_dir(dir), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Err::IoError;
                         }));
    CHECK_THROWS_AS(load_dataset_dir(dir / "missing"), Error);
}
