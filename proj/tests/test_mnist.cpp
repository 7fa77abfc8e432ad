#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <zlib.h>

#include "srbm/mnist.hpp"
#include "test_support.hpp"

using namespace srbm;
using namespace srbm::mnist;
namespace tu = srbm::test_util;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(std::uint8_t(v >> shift));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
    std::vector<std::uint8_t> out;
    put_be32(out, image_magic);
    put_be32(out, count);
    put_be32(out, rows);
    put_be32(out, cols);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<int>& labels) {
    std::vector<std::uint8_t> out;
    put_be32(out, label_magic);
    put_be32(out, std::uint32_t(labels.size()));
    for (int l : labels) out.push_back(std::uint8_t(l));
    return out;
}

void write_raw(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void write_gz(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    gzFile f = gzopen(path.c_str(), "wb");
    ASSERT_NE(f, nullptr);
    ASSERT_EQ(gzwrite(f, bytes.data(), unsigned(bytes.size())), int(bytes.size()));
    gzclose(f);
}

/// n images of 2x2 pixels, image k filled with value k % 256, labels k % 10.
struct Synthetic {
    RawImages images;
    std::vector<int> labels;
};

Synthetic synthetic(std::uint32_t n) {
    Synthetic s;
    std::vector<std::uint8_t> px;
    for (std::uint32_t k = 0; k < n; ++k) {
        for (int i = 0; i < 4; ++i) px.push_back(std::uint8_t(k % 256));
        s.labels.push_back(int(k % 10));
    }
    s.images = parse_idx_images(idx_images(n, 2, 2, px));
    return s;
}

} // namespace

TEST(Idx, ParsesImagesAndLabels) {
    const std::vector<std::uint8_t> px{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110};
    const RawImages img = parse_idx_images(idx_images(2, 2, 3, px));
    EXPECT_EQ(img.count, 2u);
    EXPECT_EQ(img.rows, 2u);
    EXPECT_EQ(img.cols, 3u);
    EXPECT_EQ(img.pixels, px);
    EXPECT_EQ(img.image(1)[0], 60);
    EXPECT_EQ(parse_idx_labels(idx_labels({3, 0, 9})), (std::vector<int>{3, 0, 9}));
}

TEST(Idx, RawAndGzipFilesLoadIdentically) {
    tu::TempDir dir("idx");
    const auto bytes = idx_images(3, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    write_raw(dir.file("a"), bytes);
    write_gz(dir.file("a.gz"), bytes);
    EXPECT_EQ(load_idx_images(dir.file("a")).pixels, load_idx_images(dir.file("a.gz")).pixels);
    write_gz(dir.file("l.gz"), idx_labels({1, 2, 3}));
    EXPECT_EQ(load_idx_labels(dir.file("l.gz")), (std::vector<int>{1, 2, 3}));
}

TEST(Idx, RejectsMalformedInput) {
    auto good = idx_images(2, 2, 2, {0, 0, 0, 0, 0, 0, 0, 0});
    EXPECT_THROW(parse_idx_images({}), FormatError);
    EXPECT_THROW(parse_idx_images(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)), FormatError);
    auto truncated = good;
    truncated.pop_back();
    EXPECT_THROW(parse_idx_images(truncated), FormatError);
    auto extra = good;
    extra.push_back(0);
    EXPECT_THROW(parse_idx_images(extra), FormatError);
    EXPECT_THROW(parse_idx_images(idx_labels({1, 2})), FormatError);
    EXPECT_THROW(parse_idx_labels(good), FormatError);
    EXPECT_THROW(parse_idx_labels(idx_labels({1, 10})), FormatError);
    try {
        parse_idx_labels(good, "labels.idx");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("labels.idx: bad IDX magic 0x00000803"), std::string::npos) << e.what();
    }
}

TEST(Idx, MissingFileIsReported) {
    tu::TempDir dir("missing");
    EXPECT_THROW(load_idx_images(dir.file("nope")), FormatError);
    try {
        find_idx_file(dir.path().string(), "train-images-idx3-ubyte");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("train-images-idx3-ubyte"), std::string::npos);
    }
}

TEST(Binarize, ThresholdAtHalfIntensity) {
    const RawImages img = parse_idx_images(idx_images(1, 1, 6, {0, 127, 128, 200, 255, 1}));
    const Matrix b = binarize(img);
    Matrix expect(1, 6);
    expect << 0, 0, 1, 1, 1, 0;
    EXPECT_EQ(b, expect);
    EXPECT_EQ(binarize(b), b);
}

TEST(Splits, SizesDisjointnessAndBalance) {
    const Synthetic tr = synthetic(500);
    const Synthetic te = synthetic(30);
    SplitSpec spec;
    spec.per_digit_train = 10;
    spec.validation_size = 200;
    spec.test_size       = 25;
    spec.seed            = RngSeed{5};
    const Splits s = make_splits(tr.images, tr.labels, te.images, te.labels, spec);
    EXPECT_EQ(s.train.size(), 100);
    EXPECT_EQ(s.validation.size(), 200);
    EXPECT_EQ(s.test.size(), 25);
    EXPECT_EQ(s.train.images.cols(), 4);

    std::array<int, 10> hist{};
    for (int l : s.train.labels) ++hist[std::size_t(l)];
    for (int h : hist) EXPECT_EQ(h, 10);

    std::set<std::size_t> seen(s.train.sources.begin(), s.train.sources.end());
    for (std::size_t r : s.validation.sources) EXPECT_TRUE(seen.insert(r).second) << "row " << r << " reused";
    EXPECT_EQ(seen.size(), 300u);
    for (std::size_t n = 0; n < s.test.sources.size(); ++n) EXPECT_EQ(s.test.sources[n], n);

    for (Eigen::Index n = 0; n < s.train.size(); ++n) {
        const std::size_t src = s.train.sources[std::size_t(n)];
        EXPECT_EQ(s.train.labels[std::size_t(n)], tr.labels[src]);
        EXPECT_EQ(s.train.images(n, 0), (src % 256) > 127 ? 1.0 : 0.0);
    }
}

TEST(Splits, DeterministicInSeed) {
    const Synthetic tr = synthetic(400);
    const Synthetic te = synthetic(10);
    SplitSpec spec;
    spec.per_digit_train = 10;
    spec.validation_size = 50;
    spec.test_size       = 10;
    spec.seed            = RngSeed{1};
    const Splits a = make_splits(tr.images, tr.labels, te.images, te.labels, spec);
    const Splits b = make_splits(tr.images, tr.labels, te.images, te.labels, spec);
    EXPECT_EQ(a.train.sources, b.train.sources);
    EXPECT_EQ(a.validation.sources, b.validation.sources);
    spec.seed = RngSeed{2};
    EXPECT_NE(make_splits(tr.images, tr.labels, te.images, te.labels, spec).train.sources, a.train.sources);
}

TEST(Splits, RejectsImpossibleRequests) {
    const Synthetic tr = synthetic(90);
    const Synthetic te = synthetic(10);
    SplitSpec spec;
    spec.per_digit_train = 10;
    spec.validation_size = 0;
    spec.test_size       = 10;
    EXPECT_THROW(make_splits(tr.images, tr.labels, te.images, te.labels, spec), std::invalid_argument);
    spec.per_digit_train = 50;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    const Synthetic big = synthetic(150);
    spec.per_digit_train = 10;
    spec.validation_size = 51;
    EXPECT_THROW(make_splits(big.images, big.labels, te.images, te.labels, spec), std::invalid_argument);
    spec.validation_size = 50;
    spec.test_size       = 11;
    EXPECT_THROW(make_splits(big.images, big.labels, te.images, te.labels, spec), std::invalid_argument);
}

class RealMnist : public ::testing::Test {
protected:
    void SetUp() override {
        if (!std::filesystem::exists(std::string(SRBM_MNIST_DIR) + "/train-labels-idx1-ubyte.gz") &&
            !std::filesystem::exists(std::string(SRBM_MNIST_DIR) + "/train-labels-idx1-ubyte")) {
            GTEST_SKIP() << "MNIST not found under " << SRBM_MNIST_DIR;
        }
    }
};

TEST_F(RealMnist, CorpusHasStandardShapeAndDigitCounts) {
    const Corpus c = load_corpus(SRBM_MNIST_DIR);
    EXPECT_EQ(c.train_images.count, 60000u);
    EXPECT_EQ(c.test_images.count, 10000u);
    EXPECT_EQ(c.train_images.rows, 28u);
    EXPECT_EQ(c.train_images.cols, 28u);
    const std::array<int, 10> train_counts{5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949};
    const std::array<int, 10> test_counts{980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009};
    std::array<int, 10> tr{}, te{};
    for (int l : c.train_labels) ++tr[std::size_t(l)];
    for (int l : c.test_labels) ++te[std::size_t(l)];
    EXPECT_EQ(tr, train_counts);
    EXPECT_EQ(te, test_counts);
    EXPECT_EQ(c.train_labels[0], 5);
    EXPECT_EQ(c.test_labels[0], 7);
}

/// Byte-level reread of a gzip IDX file, sharing no code with the library parser.
std::vector<std::uint8_t> gunzip_all(const std::string& path) {
    std::vector<std::uint8_t> out;
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) return out;
    std::uint8_t buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    gzclose(f);
    return out;
}

std::uint32_t read_be(const std::vector<std::uint8_t>& d, std::size_t off) {
    return std::uint32_t(d[off]) << 24 | std::uint32_t(d[off + 1]) << 16 | std::uint32_t(d[off + 2]) << 8 | d[off + 3];
}

TEST_F(RealMnist, ParserAgreesWithIndependentReread) {
    const std::string dir = SRBM_MNIST_DIR;
    const auto images = gunzip_all(dir + "/train-images-idx3-ubyte.gz");
    const auto labels = gunzip_all(dir + "/train-labels-idx1-ubyte.gz");
    if (images.empty() || labels.empty()) GTEST_SKIP() << "gzip files not present";
    ASSERT_EQ(images.size(), 16u + 60000u * 784u);
    EXPECT_EQ(read_be(images, 0), 2051u);
    EXPECT_EQ(read_be(images, 4), 60000u);
    EXPECT_EQ(read_be(images, 8), 28u);
    EXPECT_EQ(read_be(images, 12), 28u);
    EXPECT_EQ(read_be(labels, 0), 2049u);
    EXPECT_EQ(read_be(labels, 4), 60000u);

    const RawImages raw = load_idx_images(dir + "/train-images-idx3-ubyte.gz");
    const std::vector<int> lab = load_idx_labels(dir + "/train-labels-idx1-ubyte.gz");
    EXPECT_TRUE(std::equal(raw.pixels.begin(), raw.pixels.end(), images.begin() + 16));
    ASSERT_EQ(lab.size(), 60000u);
    for (std::size_t n = 0; n < lab.size(); ++n) {
        ASSERT_EQ(lab[n], int(labels[8 + n]));
        ASSERT_LE(lab[n], 9);
    }
}

TEST_F(RealMnist, DefaultSplitsAreBalancedAndBinary) {
    SplitSpec spec;
    spec.per_digit_train = 100;
    spec.seed            = RngSeed{0};
    const Splits s = make_splits(load_corpus(SRBM_MNIST_DIR), spec);
    EXPECT_EQ(s.train.size(), 1000);
    EXPECT_EQ(s.validation.size(), 10000);
    EXPECT_EQ(s.test.size(), 10000);
    EXPECT_EQ(s.train.images.cols(), 784);
    EXPECT_TRUE(is_binary(s.train.images));
    const double density = s.test.images.mean();
    EXPECT_GT(density, 0.10);
    EXPECT_LT(density, 0.16);
}
