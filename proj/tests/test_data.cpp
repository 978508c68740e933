#include <gtest/gtest.h>

#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace infofair;

namespace {

DatasetSchema toy_schema() {
  DatasetSchema s;
  s.features = {{"age", ColumnKind::continuous, {}}, {"job", ColumnKind::categorical, {"a", "b", "c"}}};
  s.label = "y";
  s.label_values = {"no", "yes"};
  s.sensitive = {{"gender", {"f", "m"}}, {"race", {"r0", "r1", "r2"}}};
  return s;
}

const char* kToyCsv =
    "age,job,gender,race,y\n"
    "31,a,f,r0,no\n"
    "45.5,c,m,r2,yes\n"
    "\"27\", b ,m,r1,no\n";

RawTable toy_table() {
  std::istringstream in(kToyCsv);
  return read_csv(in, toy_schema());
}

std::string error_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_csv(in, toy_schema());
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadCsv, ToyFileGivesTypedRows) {
  const RawTable t = toy_table();
  ASSERT_EQ(t.rows, 3u);
  EXPECT_EQ(t.features[0], (std::vector<double>{31, 45.5, 27}));
  EXPECT_EQ(t.features[1], (std::vector<double>{0, 2, 1}));
  EXPECT_EQ(t.label, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(t.sensitive[1], (std::vector<int>{0, 2, 1}));
}

TEST(LoadCsv, UnknownCategoryNamesRowAndColumn) {
  const auto msg = error_of("age,job,gender,race,y\n31,a,f,r0,no\n40,z,m,r1,yes\n");
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'job'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown category 'z'"), std::string::npos) << msg;
}

TEST(LoadCsv, UnknownSensitiveValueAndLabelAreRejected) {
  EXPECT_NE(error_of("age,job,gender,race,y\n31,a,x,r0,no\n").find("'gender'"), std::string::npos);
  EXPECT_NE(error_of("age,job,gender,race,y\n31,a,f,r0,maybe\n").find("unknown label"), std::string::npos);
}

TEST(LoadCsv, MissingColumnAndBadNumber) {
  EXPECT_NE(error_of("age,job,gender,y\n31,a,f,no\n").find("missing column 'race'"), std::string::npos);
  const auto msg = error_of("age,job,gender,race,y\nthirty,a,f,r0,no\n");
  EXPECT_NE(msg.find("unparseable number"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
}

TEST(LoadCsv, MissingFileIsAnError) {
  EXPECT_THROW(load_csv("/nonexistent/file.csv", toy_schema()), DataError);
}

TEST(LoadCsv, AdultIncomeRowCount) {
  const char* path = std::getenv("INFOFAIR_ADULT_CSV");
  if (!path) GTEST_SKIP() << "set INFOFAIR_ADULT_CSV to the cleaned Adult Income CSV";
  const auto schema = DatasetSchema::load(std::string(INFOFAIR_SOURCE_DIR) + "/data/schemas/adult.json");
  EXPECT_EQ(load_csv(path, schema).rows, 45222u);
}

TEST(Schema, ValidationRules) {
  auto s = toy_schema();
  s.sensitive.push_back({"y", {"no", "yes"}});
  EXPECT_THROW(s.validate(), DataError);
  s = toy_schema();
  s.features[1].categories = {"only"};
  EXPECT_THROW(s.validate(), DataError);
  s = toy_schema();
  s.sensitive.clear();
  EXPECT_THROW(s.validate(), DataError);
  s = toy_schema();
  s.features.push_back({"gender", ColumnKind::continuous, {}});
  EXPECT_THROW(s.validate(), DataError);
}

TEST(Schema, JsonRoundTrip) {
  const auto s = toy_schema();
  const auto back = DatasetSchema::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
}

TEST(Schema, ShippedSchemasLoad) {
  for (const char* name : {"adult", "compas", "dutch", "synthetic"}) {
    EXPECT_NO_THROW(DatasetSchema::load(std::string(INFOFAIR_SOURCE_DIR) + "/data/schemas/" + name + ".json"))
        << name;
  }
}

TEST(Encode, CategoricalBlockIsOneHot) {
  const auto ds = encode(toy_table(), toy_schema(), {false, {}});
  ASSERT_EQ(ds.d, 4u);  // age + 3 job columns
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"age", "job=a", "job=b", "job=c"}));
  for (std::size_t i = 0; i < ds.n; ++i) EXPECT_EQ(ds.x(i, 1) + ds.x(i, 2) + ds.x(i, 3), 1.0);
}

TEST(Encode, ConstantContinuousColumnIsRejected) {
  std::istringstream in("age,job,gender,race,y\n30,a,f,r0,no\n30,b,m,r1,yes\n");
  const auto t = read_csv(in, toy_schema());
  try {
    encode(t, toy_schema());
    FAIL() << "expected a zero-variance error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zero variance"), std::string::npos);
  }
}

TEST(Encode, GenderAndRaceGiveWidthFiveAndSixGroups) {
  const auto ds = encode(toy_table(), toy_schema());
  EXPECT_EQ(ds.s_width, 5u);
  EXPECT_EQ(ds.group_card, 6);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double* row = ds.s_multi.data() + i * ds.s_width;
    EXPECT_EQ(row[0] + row[1], 1.0);
    EXPECT_EQ(row[2] + row[3] + row[4], 1.0);
  }
  EXPECT_EQ(ds.group, (std::vector<int>{0, 5, 4}));
}

TEST(Encode, SensitiveColumnsAreOptionalFeatures) {
  const auto with = encode(toy_table(), toy_schema());
  const auto without = encode(toy_table(), toy_schema(), {false, {}});
  EXPECT_EQ(with.d, without.d + 5);
  EXPECT_EQ(with.feature_names.back(), "race=r2");
}

TEST(Encode, LabelNeverAppearsInFeatures) {
  const auto ds = encode(toy_table(), toy_schema());
  for (const auto& name : ds.feature_names) {
    EXPECT_NE(name, "y");
    EXPECT_NE(name.rfind("y=", 0), 0u) << name;
  }
}

TEST(Encode, ActiveSubsetControlsGroups) {
  auto ds = encode(toy_table(), toy_schema(), {true, {"race"}});
  EXPECT_EQ(ds.group_card, 3);
  EXPECT_EQ(ds.group, (std::vector<int>{0, 2, 1}));
  EXPECT_THROW(set_active_sensitive(ds, {"height"}), DataError);
  EXPECT_THROW(set_active_sensitive(ds, {"race", "race"}), DataError);
}

TEST(MapToGroup, SingleAttributeIsIdentity) {
  const std::vector<int> cards{7};
  for (int v = 0; v < 7; ++v) {
    const std::vector<int> idx{v};
    EXPECT_EQ(map_to_group(idx, cards), v);
  }
}

TEST(MapToGroup, MixedRadixExample) {
  const std::vector<int> cards{2, 3}, idx{1, 1};
  EXPECT_EQ(map_to_group(idx, cards), 4);
}

TEST(MapToGroup, RoundTripOverTwelveCases) {
  const std::vector<int> cards{2, 3, 2};
  std::set<int> seen;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 2; ++c) {
        const std::vector<int> v{a, b, c};
        const int g = map_to_group(v, cards);
        EXPECT_EQ(unmap_group(g, cards), v);
        seen.insert(g);
      }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), 11);
}

TEST(MapToGroup, BijectiveForEveryCardinalityVectorUpTo64) {
  std::size_t vectors = 0;
  std::function<void(std::vector<int>&, int)> visit = [&](std::vector<int>& cards, int product) {
    if (!cards.empty()) {
      ++vectors;
      const int total = group_count(cards);
      ASSERT_EQ(total, product);
      for (int g = 0; g < total; ++g) {
        const auto v = unmap_group(g, cards);
        ASSERT_EQ(map_to_group(v, cards), g);
      }
    }
    if (cards.size() == 6) return;
    for (int c = 1; c * product <= 64; ++c) {
      cards.push_back(c);
      visit(cards, product * c);
      cards.pop_back();
    }
  };
  std::vector<int> cards;
  visit(cards, 1);
  EXPECT_GT(vectors, 1000u);
}

TEST(MapToGroup, OutOfRangeIndexThrows) {
  const std::vector<int> cards{2, 3}, bad{2, 0}, neg{0, -1}, short_idx{1};
  EXPECT_THROW(map_to_group(bad, cards), std::out_of_range);
  EXPECT_THROW(map_to_group(neg, cards), std::out_of_range);
  EXPECT_THROW(map_to_group(short_idx, cards), std::out_of_range);
  EXPECT_THROW(unmap_group(6, cards), std::out_of_range);
}

TEST(ProjectGroup, AgreesWithEnumeration) {
  const std::vector<int> cards{2, 3, 2};
  const std::vector<std::vector<std::size_t>> subsets{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
  for (const auto& keep : subsets) {
    std::vector<int> sub_cards;
    for (auto k : keep) sub_cards.push_back(cards[k]);
    for (int g = 0; g < 12; ++g) {
      const auto full = unmap_group(g, cards);
      std::vector<int> sub;
      for (auto k : keep) sub.push_back(full[k]);
      EXPECT_EQ(project_group(g, cards, keep), map_to_group(sub, sub_cards));
    }
  }
}

TEST(ProjectGroup, MatchesReencodingWithTheSubset) {
  const auto joint = testing_support::small_synthetic(300, 3);
  auto gender = joint;
  set_active_sensitive(gender, {"gender"});
  const std::vector<std::size_t> keep{0};
  for (std::size_t i = 0; i < joint.n; ++i) {
    EXPECT_EQ(gender.group[i], project_group(joint.group[i], joint.cards, keep));
  }
}

TEST(Split, SizesFollowFractions) {
  const auto ds = testing_support::two_gaussians(100, 1);
  const auto s = split(ds, {0.7, 0.1, 0.2, 0});
  EXPECT_EQ(s.train.n, 70u);
  EXPECT_EQ(s.validation.n, 10u);
  EXPECT_EQ(s.test.n, 20u);
}

TEST(Split, DeterministicDisjointCover) {
  const auto ds = testing_support::two_gaussians(137, 2);
  const auto a = split(ds, {0.7, 0.1, 0.2, 9});
  const auto b = split(ds, {0.7, 0.1, 0.2, 9});
  EXPECT_EQ(a.train_rows, b.train_rows);
  EXPECT_EQ(a.test_rows, b.test_rows);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), split(ds, {0.7, 0.1, 0.2, 10}).hash());
  std::vector<std::size_t> all;
  for (const auto* rows : {&a.train_rows, &a.validation_rows, &a.test_rows})
    all.insert(all.end(), rows->begin(), rows->end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(ds.n);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(all, expected);
}

TEST(Split, StandardizesWithTrainingStatistics) {
  const auto ds = testing_support::small_synthetic(500, 4);
  const auto s = split(ds, {0.7, 0.1, 0.2, 1});
  for (std::size_t c : ds.continuous_columns) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < s.train.n; ++i) m += s.train.x(i, c);
    m /= static_cast<double>(s.train.n);
    for (std::size_t i = 0; i < s.train.n; ++i) v += (s.train.x(i, c) - m) * (s.train.x(i, c) - m);
    v /= static_cast<double>(s.train.n);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-9);
    // validation uses the same affine map
    const auto& st = *s.train.standardizer;
    const std::size_t k = static_cast<std::size_t>(
        std::find(st.columns.begin(), st.columns.end(), c) - st.columns.begin());
    const std::size_t r = s.validation_rows[0];
    EXPECT_NEAR(s.validation.x(0, c), (ds.x(r, c) - st.mean[k]) / st.stddev[k], 1e-12);
  }
}

TEST(Split, ErrorPaths) {
  const auto tiny = testing_support::two_gaussians(9, 1);
  EXPECT_THROW(split(tiny, {0.7, 0.1, 0.2, 0}), DataError);
  const auto ds = testing_support::two_gaussians(50, 1);
  EXPECT_THROW(split(ds, {0.7, 0.3, 0.0, 0}), DataError);
  EXPECT_THROW(split(ds, {0.5, 0.1, 0.2, 0}), DataError);
}

TEST(Batches, SizesAndCoverage) {
  const auto b = batches(10, 4, 0, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  std::vector<std::size_t> all;
  for (const auto& x : b) all.insert(all.end(), x.begin(), x.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
}

TEST(Batches, DeterministicPerEpochAndDifferentAcrossEpochs) {
  EXPECT_EQ(batches(1000, 64, 3, 5), batches(1000, 64, 3, 5));
  EXPECT_NE(batches(1000, 1000, 3, 5), batches(1000, 1000, 3, 6));
  EXPECT_NE(batches(1000, 1000, 3, 5), batches(1000, 1000, 4, 5));
  EXPECT_THROW(batches(10, 0, 0, 0), std::invalid_argument);
}
