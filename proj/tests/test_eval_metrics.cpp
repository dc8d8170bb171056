#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "graspcheck/dataset.hpp"
#include "graspcheck/error.hpp"
#include "graspcheck/eval_metrics.hpp"
#include "graspcheck/pipeline.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace graspcheck;
using graspcheck::testing::error_kind_of;
using graspcheck::testing::fixture;
using graspcheck::testing::read_text;
using graspcheck::testing::TempDir;
using graspcheck::testing::write_text;

namespace {

std::vector<EvalRecord> random_records(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> cat(0, 2), obj(0, 5);
  std::bernoulli_distribution coin(0.5), mostly(0.85), predicted(0.9);
  std::vector<EvalRecord> out;
  for (int i = 0; i < n; ++i) {
    EvalRecord r;
    r.example_id = "e" + std::to_string(i);
    r.category = kAllCategories[cat(rng)];
    r.true_label = r.category == Category::kNoObject ? GraspLabel::kNoObject : GraspLabel::kObject;
    if (r.category != Category::kNoObject)
      r.object_id = std::string(to_string(r.category)) + "_" + std::to_string(obj(rng));
    r.detection_correct = mostly(rng);
    if (predicted(rng)) r.predicted_label = coin(rng) ? GraspLabel::kNoObject : GraspLabel::kObject;
    out.push_back(r);
  }
  return out;
}

std::string pct1(const ClassificationTable& t, Category c) { return format_fixed(*t.at(c).pct, 1); }

}  // namespace

TEST_CASE("detection table over the real-evaluation records") {
  const auto records = load_records(fixture("records/graspchecknet.jsonl"));
  REQUIRE(records.size() == 518);
  const auto t = detection_table(records);
  CHECK(t.at(Category::kNoObject).num_images == 158);
  CHECK(t.at(Category::kNoObject).num_detected == 155);
  CHECK(t.at(Category::kRigid).num_images == 150);
  CHECK(t.at(Category::kRigid).num_detected == 142);
  CHECK(t.at(Category::kDeformable).num_images == 210);
  CHECK(t.at(Category::kDeformable).num_detected == 203);
  CHECK(format_fixed(t.at(Category::kNoObject).pct_detected, 2) == "98.10");
  CHECK(format_fixed(t.at(Category::kRigid).pct_detected, 2) == "94.67");
  CHECK(format_fixed(t.at(Category::kDeformable).pct_detected, 2) == "96.67");
  CHECK_FALSE(t.at(Category::kNoObject).pct_objects_correct);
  CHECK(t.at(Category::kRigid).num_objects == 16);
  CHECK(t.at(Category::kRigid).num_objects_correct == 10);
  CHECK(t.at(Category::kDeformable).num_objects == 23);
  CHECK(t.at(Category::kDeformable).num_objects_correct == 19);
  CHECK(format_fixed(*t.at(Category::kRigid).pct_objects_correct, 2) == "62.50");
  CHECK(format_fixed(*t.at(Category::kDeformable).pct_objects_correct, 2) == "82.61");
}

TEST_CASE("classification accuracy for the three model fixtures") {
  const auto gcn = classification_table(load_records(fixture("records/graspchecknet.jsonl")));
  CHECK(pct1(gcn, Category::kNoObject) == "74.7");
  CHECK(pct1(gcn, Category::kRigid) == "86.7");
  CHECK(pct1(gcn, Category::kDeformable) == "82.9");
  const auto gpt = classification_table(load_records(fixture("records/gpt4o.jsonl")));
  CHECK(pct1(gpt, Category::kNoObject) == "95.0");
  CHECK(pct1(gpt, Category::kRigid) == "95.3");
  CHECK(pct1(gpt, Category::kDeformable) == "78.1");
  const auto llama = classification_table(load_records(fixture("records/llama_table2.jsonl")));
  CHECK(pct1(llama, Category::kNoObject) == "48.7");
  CHECK(pct1(llama, Category::kRigid) == "68.7");
  CHECK(pct1(llama, Category::kDeformable) == "60.0");
}

TEST_CASE("precision and recall for the model fixtures") {
  const auto gcn = precision_recall(load_records(fixture("records/graspchecknet.jsonl")));
  CHECK(gcn.tp == 116);
  CHECK(gcn.fp == 55);
  CHECK(gcn.fn == 39);
  CHECK(std::abs(*gcn.precision - 0.678) <= 0.001);
  CHECK(std::abs(*gcn.recall - 0.749) <= 0.001);
  const auto gpt = precision_recall(load_records(fixture("records/gpt4o.jsonl")));
  CHECK(format_fixed(*gpt.precision, 3) == "0.739");
  CHECK(format_fixed(*gpt.recall, 3) == "0.950");
  const auto llama = precision_recall(load_records(fixture("records/llama_table3.jsonl")));
  CHECK(format_fixed(*llama.precision, 3) == "0.357");
  CHECK(format_fixed(*llama.recall, 3) == "0.513");
}

TEST_CASE("deriving precision and recall from per-category accuracy") {
  const auto gcn = derive_pr_from_accuracies(
      kRealEvalCounts, {{Category::kNoObject, 74.7}, {Category::kRigid, 86.7}, {Category::kDeformable, 82.9}});
  CHECK(gcn.tp == 118);
  CHECK(gcn.fp == 56);
  CHECK(gcn.fn == 40);
  const auto gpt = derive_pr_from_accuracies(
      kRealEvalCounts, {{Category::kNoObject, 95.0}, {Category::kRigid, 95.3}, {Category::kDeformable, 78.1}});
  CHECK(gpt.tp == 150);
  CHECK(gpt.fp == 53);
  const auto llama = derive_pr_from_accuracies(
      kRealEvalCounts, {{Category::kNoObject, 48.7}, {Category::kRigid, 68.7}, {Category::kDeformable, 60.0}});
  CHECK(llama.tp == 77);
  CHECK(llama.fp == 131);
  CHECK(format_fixed(*llama.precision, 3) == "0.370");

  const auto perfect = derive_pr_from_accuracies(
      kRealEvalCounts, {{Category::kNoObject, 100.0}, {Category::kRigid, 100.0}, {Category::kDeformable, 100.0}});
  CHECK(*perfect.precision == 1.0);
  CHECK(*perfect.recall == 1.0);
  const auto none = derive_pr_from_accuracies(
      kRealEvalCounts, {{Category::kNoObject, 0.0}, {Category::kRigid, 100.0}, {Category::kDeformable, 100.0}});
  CHECK_FALSE(none.precision);
  CHECK(*none.recall == 0.0);
  CHECK(error_kind_of([] { derive_pr_from_accuracies(kRealEvalCounts, {{Category::kNoObject, 50.0}}); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("cross-table consistency") {
  auto table_acc = [](const ClassificationTable& t) {
    std::map<Category, double> acc;
    for (const auto& [c, cell] : t) acc[c] = *cell.pct;
    return acc;
  };
  for (const char* name : {"graspchecknet", "gpt4o"}) {
    CAPTURE(name);
    const auto recs = load_records(fixture(std::string("records/") + name + ".jsonl"));
    const auto rep = check_consistency(precision_recall(recs),
                                       derive_pr_from_accuracies(kRealEvalCounts, table_acc(classification_table(recs))));
    CHECK(rep.consistent);
    CHECK(rep.summary == "consistent (tolerance 0.002)");
  }
  const auto rep = check_consistency(
      precision_recall(load_records(fixture("records/llama_table3.jsonl"))),
      derive_pr_from_accuracies(kRealEvalCounts,
                                table_acc(classification_table(load_records(fixture("records/llama_table2.jsonl"))))));
  CHECK_FALSE(rep.consistent);
  CHECK(rep.summary.find("INCONSISTENT: precision derived 0.370 vs measured 0.357") == 0);
  CHECK(rep.summary.find("recall derived 0.487 vs measured 0.513") != std::string::npos);
}

TEST_CASE("metrics agree with a brute-force confusion count") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const auto records = random_records(rng, std::uniform_int_distribution<int>(0, 300)(rng));
    for (Population pop : {Population::kPredicted, Population::kDetectedAndPredicted}) {
      const auto c = oracle::confusion(records, pop == Population::kDetectedAndPredicted);
      const auto pr = precision_recall(records, pop);
      CHECK(pr.tp == c.tp);
      CHECK(pr.fp == c.fp);
      CHECK(pr.fn == c.fn);
      CHECK(pr.precision.has_value() == (c.tp + c.fp > 0));
      CHECK(pr.recall.has_value() == (c.tp + c.fn > 0));
      if (pr.precision) CHECK(*pr.precision == double(c.tp) / double(c.tp + c.fp));
      if (pr.recall) CHECK(*pr.recall == double(c.tp) / double(c.tp + c.fn));

      const auto table = classification_table(records, pop);
      std::size_t total = 0, correct = 0;
      for (const auto& [cat, cell] : table) {
        total += cell.total;
        correct += cell.correct;
        CHECK(cell.correct <= cell.total);
        CHECK(cell.pct.has_value() == (cell.total > 0));
      }
      CHECK(total == c.tp + c.fp + c.fn + c.tn);
      CHECK(correct == c.tp + c.tn);
    }
    // Detection percentages times counts recover the integer counts.
    for (const auto& [cat, row] : detection_table(records)) {
      CHECK(std::llround(row.pct_detected * row.num_images / 100.0) == static_cast<long long>(row.num_detected));
    }
  }
}

TEST_CASE("metrics are invariant under record permutation") {
  std::mt19937_64 rng(66);
  auto records = random_records(rng, 400);
  const auto pr = precision_recall(records);
  const auto table = classification_table(records);
  const auto det = detection_table(records);
  std::shuffle(records.begin(), records.end(), rng);
  const auto pr2 = precision_recall(records);
  CHECK(pr2.tp == pr.tp);
  CHECK(pr2.fp == pr.fp);
  CHECK(pr2.fn == pr.fn);
  for (Category c : kAllCategories) {
    CHECK(classification_table(records).at(c).correct == table.at(c).correct);
    CHECK(detection_table(records).at(c).num_detected == det.at(c).num_detected);
    CHECK(detection_table(records).at(c).num_objects_correct == det.at(c).num_objects_correct);
  }
}

TEST_CASE("undefined ratios") {
  std::vector<EvalRecord> only_objects;
  for (int i = 0; i < 5; ++i)
    only_objects.push_back({"e" + std::to_string(i), Category::kRigid, "rigid_0", true, GraspLabel::kObject,
                            GraspLabel::kObject});
  const auto pr = precision_recall(only_objects);
  CHECK_FALSE(pr.precision);
  CHECK_FALSE(pr.recall);
  CHECK(pr_json(pr)["precision"].is_null());
  CHECK(pr_table_text({{"m", pr}}).find("undefined") != std::string::npos);
  CHECK_FALSE(classification_table(only_objects).at(Category::kNoObject).pct);
  CHECK(precision_recall({}).tp == 0);
}

TEST_CASE("latency statistics") {
  CHECK(latency_stats({42.0}).std_ms == 0.0);
  CHECK(latency_stats({42.0}).mean_ms == 42.0);
  const auto s = latency_stats({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  CHECK(s.mean_ms == 5.0);
  CHECK(s.std_ms == 2.0);
  CHECK(s.count == 8);
  CHECK(latency_stats(std::vector<double>(100, 7.5)).std_ms == 0.0);
  CHECK(error_kind_of([] { latency_stats({}); }) == ErrorKind::kInvalidArgument);
  CHECK(error_kind_of([] { latency_stats({1.0, -1.0}); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("half-up rounding and fixed formatting") {
  CHECK(round_half_up(0.6785, 3) == doctest::Approx(0.679));
  CHECK(round_half_up(2.675, 2) == doctest::Approx(2.68));
  CHECK(round_half_up(74.68354, 1) == doctest::Approx(74.7));
  CHECK(round_half_up(-1.25, 1) == doctest::Approx(-1.3));
  CHECK(format_fixed(98.10126582, 2) == "98.10");
  CHECK(format_fixed(0.95, 3) == "0.950");
  CHECK(format_fixed(0.0, 1) == "0.0");
}

TEST_CASE("synthetic detection correctness") {
  const SyntheticTruth truth{{{{10.0, 10.0}, {30.0, 12.0}}}, 0.6};
  CHECK(detection_correct_synthetic({5, 5, 40, 40}, truth));
  CHECK_FALSE(detection_correct_synthetic({15, 5, 40, 40}, truth));  // misses a fingertip
  SyntheticTruth sparse = truth;
  sparse.mask_fraction = 0.4;
  CHECK_FALSE(detection_correct_synthetic({5, 5, 40, 40}, sparse));
  sparse.mask_fraction = 0.5;
  CHECK(detection_correct_synthetic({5, 5, 40, 40}, sparse));
  CHECK(error_kind_of([] { detection_correct_synthetic({5, 5, 40, 40}, std::nullopt); }) ==
        ErrorKind::kMissingGroundTruth);
}

TEST_CASE("record files round-trip and reject bad input") {
  const auto path = fixture("records/gpt4o.jsonl");
  const auto records = load_records(path);
  CHECK(serialize_records(records) == read_text(path));

  TempDir tmp;
  write_text(tmp / "bad.jsonl", R"({"example_id":"a","category":"no_object","object_id":"cup","detection_correct":true,"predicted_label":1,"true_label":1})" "\n");
  CHECK(error_kind_of([&] { load_records(tmp / "bad.jsonl"); }) == ErrorKind::kMalformedAnnotation);
  write_text(tmp / "label.jsonl", R"({"example_id":"a","category":"no_object","object_id":null,"detection_correct":true,"predicted_label":0,"true_label":0})" "\n");
  CHECK(error_kind_of([&] { load_records(tmp / "label.jsonl"); }) == ErrorKind::kMalformedAnnotation);
}

TEST_CASE("building records from verdicts and a review file") {
  const Dataset d = load_dataset(fixture("small"));
  std::vector<VerdictRow> rows;
  for (const auto& e : d.examples) {
    GraspVerdict v;
    v.label = GraspLabel::kNoObject;
    rows.push_back({e.image_ref, v});
  }
  rows[1].verdict.reset();

  TempDir tmp;
  std::string review;
  for (const auto& e : d.examples)
    review += R"({"example_id":")" + e.image_ref + R"(","detection_correct":true})" "\n";
  write_text(tmp / "review.jsonl", review);
  const auto recs = build_records(d, rows, tmp / "review.jsonl");
  REQUIRE(recs.size() == d.examples.size());
  CHECK(recs[0].predicted_label == GraspLabel::kNoObject);
  CHECK(recs[0].detection_correct);
  CHECK_FALSE(recs[1].predicted_label);
  CHECK_FALSE(recs[1].detection_correct);
  CHECK(recs[1].true_label == d.examples[1].annotation.label);

  // Missing review entry.
  write_text(tmp / "short.jsonl", review.substr(0, review.find('\n') + 1));
  CHECK(error_kind_of([&] { build_records(d, rows, tmp / "short.jsonl"); }) == ErrorKind::kMissingGroundTruth);
  // The join is keyed by image, so verdict order does not matter.
  auto shuffled = rows;
  std::swap(shuffled[0], shuffled[2]);
  CHECK(build_records(d, shuffled, tmp / "review.jsonl") == recs);
  // Duplicate or missing verdicts do not join.
  auto doubled = rows;
  doubled.push_back(rows[0]);
  CHECK(error_kind_of([&] { build_records(d, doubled, tmp / "review.jsonl"); }) == ErrorKind::kInvalidArgument);
  rows.pop_back();
  CHECK(error_kind_of([&] { build_records(d, rows, tmp / "review.jsonl"); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("text and json tables") {
  const auto recs = load_records(fixture("records/graspchecknet.jsonl"));
  const auto det_text = detection_table_text(detection_table(recs));
  CHECK(det_text.find("98.10") != std::string::npos);
  CHECK(det_text.find("82.61") != std::string::npos);
  const auto cls_text = classification_table_text({{"pipeline", classification_table(recs)}});
  CHECK(cls_text.find("74.7") != std::string::npos);
  const auto j = classification_table_json(classification_table(recs));
  CHECK(j.dump().find("74.7") != std::string::npos);
  CHECK(detection_table_json(detection_table(recs)).dump().find("98.1") != std::string::npos);
  CHECK(population_from_string(to_string(Population::kPredicted)) == Population::kPredicted);
  CHECK(population_from_string(to_string(Population::kDetectedAndPredicted)) == Population::kDetectedAndPredicted);
}
