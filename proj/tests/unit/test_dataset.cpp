#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "discloc/dataset.hpp"
#include "discloc/errors.hpp"
#include "support/synthetic.hpp"

using namespace discloc;
using namespace discloc::dataset;
using discloc::testing::fixture_dir;
using discloc::testing::TempDir;
using discloc::testing::write_text;
namespace fs = std::filesystem;

namespace {

std::vector<PartLocation> mini_parts(int img) {
    std::vector<PartLocation> out;
    for (int p = 1; p <= 15; ++p) {
        const bool vis = (p + img) % 3 != 0;
        out.push_back({p, vis ? 100.0 + 10 * p + img : 0.0, vis ? 50.0 + 5 * p + 2 * img : 0.0, vis});
    }
    return out;
}

// Copies the mini fixture into `dst`, replacing line `line` (1-based) of
// `file` with `replacement`.
void copy_with_edit(const fs::path& dst, const std::string& file, std::size_t line, const std::string& replacement) {
    fs::copy(fixture_dir() / "cub_mini", dst, fs::copy_options::recursive);
    std::ifstream in(dst / file);
    std::string text, row;
    for (std::size_t n = 1; std::getline(in, row); ++n) text += (n == line ? replacement : row) + "\n";
    in.close();
    write_text(dst / file, text);
}

}  // namespace

TEST(Dataset, MiniFixtureParsesExactly) {
    const auto index = load_index(fixture_dir() / "cub_mini");
    DatasetIndex expected;
    expected.entries[1] = IndexEntry{"001.Black_footed_Albatross/Black_Footed_Albatross_0046_18.jpg", 0, false,
                                     geometry::Box{60, 27, 384, 330}, mini_parts(1)};
    expected.entries[2] = IndexEntry{"001.Black_footed_Albatross/Black_Footed_Albatross_0009_34.jpg", 0, true,
                                     geometry::Box{139, 30, 291, 293}, mini_parts(2)};
    expected.entries[3] = IndexEntry{"014.Indigo_Bunting/Indigo_Bunting_0063_11820.jpg", 13, true,
                                     geometry::Box{112, 90, 312, 265}, mini_parts(3)};
    EXPECT_EQ(index.entries, expected.entries);
    EXPECT_EQ(index.size(), 3u);
    EXPECT_EQ(index.train_count(), 2u);
    EXPECT_EQ(index.test_count(), 1u);
}

TEST(Dataset, BoxConversionRoundTrips) {
    const auto b = box_from_xywh(60, 27, 325, 304);
    EXPECT_EQ(b, (geometry::Box{60, 27, 384, 330}));
    EXPECT_EQ(b.width(), 325.0);
    EXPECT_EQ(xywh_from_box(b), (std::array<double, 4>{60, 27, 325, 304}));
}

struct CorruptCase {
    std::string file;
    std::size_t line;
    std::string replacement;
};

class CorruptLine : public ::testing::TestWithParam<CorruptCase> {};

TEST_P(CorruptLine, ReportsFileAndLine) {
    const auto& c = GetParam();
    TempDir tmp;
    copy_with_edit(tmp / "cub", c.file, c.line, c.replacement);
    try {
        load_index(tmp / "cub");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.file(), c.file);
        EXPECT_EQ(e.line(), c.line);
    }
}

INSTANTIATE_TEST_SUITE_P(
    Dataset, CorruptLine,
    ::testing::Values(CorruptCase{"image_class_labels.txt", 2, "2 one"},
                      CorruptCase{"image_class_labels.txt", 3, "3 201"},
                      CorruptCase{"images.txt", 1, "1"},
                      CorruptCase{"bounding_boxes.txt", 3, "3 112.0 90.0 -4.0 176.0"},
                      CorruptCase{"bounding_boxes.txt", 2, "2 139.0 30.0 nan 264.0"},
                      CorruptCase{"train_test_split.txt", 3, "3 2"},
                      CorruptCase{"parts/part_locs.txt", 17, "2 2 111.0 57.0 1 9"},
                      CorruptCase{"parts/part_locs.txt", 40, "3 16 1.0 1.0 1"}));

TEST(Dataset, BlankLinesKeepNumbering) {
    TempDir tmp;
    fs::copy(fixture_dir() / "cub_mini", tmp / "cub", fs::copy_options::recursive);
    write_text(tmp / "cub" / "train_test_split.txt", "1 0\n\n2 1\n3 x\n");
    try {
        load_index(tmp / "cub");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(Dataset, MissingFileIsMissingAnnotation) {
    TempDir tmp;
    fs::copy(fixture_dir() / "cub_mini", tmp / "cub", fs::copy_options::recursive);
    fs::remove(tmp / "cub" / "bounding_boxes.txt");
    EXPECT_THROW(load_index(tmp / "cub"), MissingAnnotation);
}

TEST(Dataset, InconsistentIdsAreReported) {
    {
        TempDir tmp;
        copy_with_edit(tmp / "cub", "image_class_labels.txt", 3, "4 2");
        EXPECT_THROW(load_index(tmp / "cub"), InconsistentIndex);
    }
    {
        TempDir tmp;
        copy_with_edit(tmp / "cub", "images.txt", 3, "2 dup.jpg");
        EXPECT_THROW(load_index(tmp / "cub"), InconsistentIndex);
    }
    {
        TempDir tmp;
        copy_with_edit(tmp / "cub", "parts/part_locs.txt", 45, "");
        EXPECT_THROW(load_index(tmp / "cub"), InconsistentIndex);
    }
}

TEST(Dataset, FeaturesCheckedAgainstWeights) {
    TempDir tmp;
    write_tensor(Matrix2(200, 1024), tmp / "weights.npy");
    write_tensor(Tensor3(512, 2, 2), tmp / "7.npy");
    const auto w = load_weights(tmp.path());
    try {
        load_feature_tensor(tmp.path(), 7, w);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("image 7"), std::string::npos);
    }
    write_tensor(Tensor3(1024, 2, 2), tmp / "8.npy");
    const auto [f, w2] = load_features(tmp.path(), 8);
    EXPECT_EQ(f.channels(), 1024u);
    EXPECT_EQ(w2.rows(), 200u);
    EXPECT_THROW(load_feature_tensor(tmp.path(), 9, w), IoError);
}

TEST(Dataset, JoinRespectsSplit) {
    const auto index = load_index(fixture_dir() / "cub_mini");
    std::map<ImageId, Prediction> preds{{1, {0, geometry::Box{60, 27, 384, 330}}}, {3, {5, std::nullopt}}};
    const auto all = join_records(index, preds, Split::All);
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(all[0].image_id, 1);
    EXPECT_EQ(all[0].true_class, 0u);
    ASSERT_TRUE(all[0].gt_box);
    EXPECT_EQ(all[0].parts.size(), 15u);
    EXPECT_FALSE(all[1].predicted_box);
    EXPECT_EQ(join_records(index, preds, Split::Train).size(), 1u);
    EXPECT_EQ(join_records(index, preds, Split::Test).size(), 1u);
    preds[42] = {0, std::nullopt};
    EXPECT_THROW(join_records(index, preds), InconsistentIndex);
}

TEST(Dataset, RealDatasetCounts) {
    const char* root = std::getenv("DISCLOC_CUB_ROOT");
    if (!root) GTEST_SKIP() << "DISCLOC_CUB_ROOT not set";
    const auto index = load_index(root);
    EXPECT_EQ(index.size(), 11788u);
    EXPECT_EQ(index.train_count(), 5994u);
    EXPECT_EQ(index.test_count(), 5794u);
    for (const auto& [id, e] : index.entries) ASSERT_EQ(e.parts.size(), kPartsPerImage) << id;
}
