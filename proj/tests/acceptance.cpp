// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "graspcheck/backends.hpp"
#include "graspcheck/dataset.hpp"
#include "graspcheck/detect_refine.hpp"
#include "graspcheck/error.hpp"
#include "graspcheck/eval_metrics.hpp"
#include "graspcheck/gripper.hpp"
#include "graspcheck/pipeline.hpp"
#include "graspcheck/scene_synth.hpp"
#include "graspcheck/vqa.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace graspcheck;
using graspcheck::testing::fixture;

namespace {

// Tolerances and limits.
constexpr double kMetricTol = 0.001;       // fixture P/R against the published values
constexpr double kConsistencyTol = 0.002;  // derived vs measured P/R
constexpr double kTableOneSeconds = 1.0;
constexpr double kTableTwoSeconds = 1.0;
constexpr double kDbscanSeconds = 10.0;
constexpr double kGenerationSeconds = 60.0;
constexpr double kCostTol = 1e-9;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void run(int id, const std::string& name, double time_limit_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    o.ok = false;
    o.detail << " [over time limit " << time_limit_s << " s]";
  }
  failures += !o.ok;
  std::printf("%s criterion %d: %s (%.3f s)%s\n", o.ok ? "PASS" : "FAIL", id, name.c_str(), secs,
              o.detail.str().c_str());
}

std::string f3(double v) { return format_fixed(v, 3); }

std::map<Category, double> accuracies(const ClassificationTable& t) {
  std::map<Category, double> out;
  for (const auto& [c, cell] : t) out[c] = cell.pct.value_or(0.0);
  return out;
}

}  // namespace

int main() {
  run(1, "detection table over the real-evaluation fixture", kTableOneSeconds, [](Outcome& o) {
    const auto t = detection_table(load_records(fixture("records/graspchecknet.jsonl")));
    const auto& no = t.at(Category::kNoObject);
    const auto& rigid = t.at(Category::kRigid);
    const auto& deform = t.at(Category::kDeformable);
    o.expect(no.num_images == 158 && no.num_detected == 155, "no_object 158/155");
    o.expect(rigid.num_images == 150 && rigid.num_detected == 142, "rigid 150/142");
    o.expect(deform.num_images == 210 && deform.num_detected == 203, "deformable 210/203");
    o.expect(format_fixed(no.pct_detected, 2) == "98.10", "98.10");
    o.expect(format_fixed(rigid.pct_detected, 2) == "94.67", "94.67");
    o.expect(format_fixed(deform.pct_detected, 2) == "96.67", "96.67");
    o.expect(rigid.pct_objects_correct && format_fixed(*rigid.pct_objects_correct, 2) == "62.50", "62.50");
    o.expect(deform.pct_objects_correct && format_fixed(*deform.pct_objects_correct, 2) == "82.61", "82.61");
    o.detail << " detected " << format_fixed(no.pct_detected, 2) << "/" << format_fixed(rigid.pct_detected, 2) << "/"
             << format_fixed(deform.pct_detected, 2) << ", objects "
             << format_fixed(rigid.pct_objects_correct.value_or(-1), 2) << "/"
             << format_fixed(deform.pct_objects_correct.value_or(-1), 2);
  });

  run(2, "classification accuracy for three models", kTableTwoSeconds, [](Outcome& o) {
    const std::vector<std::pair<std::string, std::array<const char*, 3>>> expected{
        {"graspchecknet", {"74.7", "86.7", "82.9"}},
        {"gpt4o", {"95.0", "95.3", "78.1"}},
        {"llama_table2", {"48.7", "68.7", "60.0"}}};
    for (const auto& [name, want] : expected) {
      const auto t = classification_table(load_records(fixture("records/" + name + ".jsonl")));
      o.detail << " " << name;
      for (int k = 0; k < 3; ++k) {
        const auto& cell = t.at(kAllCategories[k]);
        const std::string got = cell.pct ? format_fixed(*cell.pct, 1) : "N/A";
        o.detail << (k ? "/" : " ") << got;
        o.expect(got == want[k], name + " " + std::string(to_string(kAllCategories[k])));
      }
    }
  });

  run(3, "precision/recall and cross-table consistency", 0, [](Outcome& o) {
    struct Want {
      std::string name, pr_file;
      double p, r;
    };
    for (const auto& w : {Want{"graspchecknet", "graspchecknet", 0.678, 0.749}, Want{"gpt4o", "gpt4o", 0.739, 0.950},
                          Want{"llama", "llama_table3", 0.357, 0.513}}) {
      const auto pr = precision_recall(load_records(fixture("records/" + w.pr_file + ".jsonl")));
      const double p = pr.precision.value_or(-1), r = pr.recall.value_or(-1);
      o.expect(std::abs(p - w.p) <= kMetricTol, w.name + " precision");
      o.expect(std::abs(r - w.r) <= kMetricTol, w.name + " recall");
      o.detail << " " << w.name << " P=" << format_fixed(p, 5) << " R=" << format_fixed(r, 5) << ";";
    }
    for (const std::string name : {"graspchecknet", "gpt4o"}) {
      const auto recs = load_records(fixture("records/" + name + ".jsonl"));
      const auto rep = check_consistency(precision_recall(recs),
                                         derive_pr_from_accuracies(kRealEvalCounts, accuracies(classification_table(recs))),
                                         kConsistencyTol);
      o.expect(rep.consistent, name + " consistent");
      o.detail << " " << name << " derived P=" << f3(rep.derived.precision.value_or(-1))
               << " R=" << f3(rep.derived.recall.value_or(-1)) << ";";
    }
    const auto llama = check_consistency(
        precision_recall(load_records(fixture("records/llama_table3.jsonl"))),
        derive_pr_from_accuracies(kRealEvalCounts,
                                  accuracies(classification_table(load_records(fixture("records/llama_table2.jsonl"))))),
        kConsistencyTol);
    o.expect(!llama.consistent, "llama flagged");
    o.detail << " llama: " << llama.summary;
  });

  run(4, "clustering equals the brute-force density oracle on 1000 sets", kDbscanSeconds, [](Outcome& o) {
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> eps(0.02, 0.25);
    std::uniform_int_distribution<int> pts(1, 4);
    const ImageSize size{640, 480};
    int mismatches = 0;
    std::size_t max_n = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto dets = oracle::random_detections(rng, size, 20);
      max_n = std::max(max_n, dets.size());
      const double e = eps(rng);
      const int m = pts(rng);
      mismatches += cluster_detections(dets, size, ClusterConfig{e, m}) != oracle::dbscan(dets, size, e, m);
    }
    o.expect(mismatches == 0, std::to_string(mismatches) + " mismatched partitions");
    o.expect(max_n <= 20, "set size");
    o.detail << " mismatches " << mismatches;
  });

  run(5, "selection picks the best box of the heaviest cluster, scale-invariant", 0, [](Outcome& o) {
    std::mt19937_64 rng(5005);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    const ImageSize size{640, 480};
    const ClusterConfig cfg;
    int bad_member = 0, bad_cluster = 0, bad_scale = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto dets = oracle::random_detections(rng, size, 20);
      const auto s = select_detection(dets, size, cfg);
      bad_member += !(s.index < dets.size() && dets[s.index] == s.detection);
      const auto labels = oracle::dbscan(dets, size, cfg.eps, cfg.min_pts);
      std::map<int, double> sums;
      for (std::size_t k = 0; k < dets.size(); ++k) sums[labels[k]] += dets[k].confidence;
      double best = 0;
      for (const auto& [c, v] : sums) best = std::max(best, v);
      bad_cluster += sums[labels[s.index]] < best - 1e-12;
      auto scaled = dets;
      const double f = scale(rng);
      for (auto& d : scaled) d.confidence *= f;
      bad_scale += select_detection(scaled, size, cfg).index != s.index;
    }
    o.expect(bad_member == 0, "member of input");
    o.expect(bad_cluster == 0, "argmax cluster");
    o.expect(bad_scale == 0, "rescaling");
    o.detail << " violations member/cluster/scale " << bad_member << "/" << bad_cluster << "/" << bad_scale;
  });

  run(6, "adaptive threshold schedule", 0, [](Outcome& o) {
    const ThresholdSchedule s;
    const auto sched = s.thresholds();
    const std::vector<double> want{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.01};
    o.expect(sched == want, "schedule");
    const int bound = static_cast<int>(std::ceil(std::log(s.floor / s.start) / std::log(s.decay_factor))) + 1;
    o.expect(static_cast<int>(sched.size()) == bound, "closed-form query bound");

    std::mt19937_64 rng(6006);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::map<std::string, std::vector<Detection>, std::less<>> table;
    for (int i = 0; i < 500; ++i) {
      std::vector<Detection> dets;
      const int n = std::uniform_int_distribution<int>(0, 4)(rng);
      for (int k = 0; k < n; ++k) dets.push_back({BoundingBox{10, 10, 50, 50}, std::pow(u(rng), 4)});
      table["img" + std::to_string(i)] = dets;
    }
    FixtureDetector det(table);
    const Image img(4, 4);
    int wrong = 0, not_found = 0, over_bound = 0;
    for (const auto& [id, dets] : table) {
      double top = -1;
      for (const auto& d : dets) top = std::max(top, d.confidence);
      const auto first = std::find_if(sched.begin(), sched.end(), [&](double t) { return top >= t; });
      try {
        const auto r = adaptive_detect(det, ImageInput{id, img}, s);
        over_bound += r.queries > bound;
        wrong += first == sched.end() || r.threshold != *first || r.queries != int(first - sched.begin()) + 1;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kGripperNotFound || first != sched.end()) ++wrong;
        ++not_found;
      }
    }
    o.expect(wrong == 0, std::to_string(wrong) + " wrong stops");
    o.expect(over_bound == 0, "query bound");
    o.expect(not_found > 0, "GripperNotFound exercised");
    o.detail << " 500 images, " << not_found << " GripperNotFound, " << det.query_count() << " queries";
  });

  run(7, "gripper closing over 200 seeded hulls", 0, [](Outcome& o) {
    const auto g = GripperGeometry::parallel_jaw();
    auto hits = [&](const ConvexHullMesh& h, const RigidTransform& p, double a) {
      return convex_hulls_intersect(g.finger_left, g.finger_left_pose(a), h, p) ||
             convex_hulls_intersect(g.finger_right, g.finger_right_pose(a), h, p);
    };
    int bad = 0, contacts = 0, unreachable_bad = 0;
    for (int seed = 0; seed < 200; ++seed) {
      Rng rng(7000 + seed);
      std::uniform_real_distribution<double> u(-1, 1), sz(0.005, 0.025);
      const Vec3 half(sz(rng), sz(rng), sz(rng));
      std::vector<Vec3> pts;
      for (int i = 0; i < 10; ++i) pts.emplace_back(u(rng) * half.x(), u(rng) * half.y(), u(rng) * half.z());
      auto hull = ConvexHullMesh::from_points(pts);
      hull = hull.transformed(RigidTransform::from_translation(-hull.centroid()));
      const RigidTransform pose = place_object_in_gripper(g, hull, rng);
      const double step = 0.02;
      const auto r = close_gripper_on_object(g, hull, pose, CloseConfig{step});
      bool ok = r.final_aperture >= 0 && r.final_aperture <= 1 && !hits(hull, pose, r.final_aperture);
      for (std::size_t k = 1; k < r.tested_apertures.size(); ++k) ok = ok && r.tested_apertures[k] < r.tested_apertures[k - 1];
      if (r.contact) {
        ++contacts;
        ok = ok && hits(hull, pose, std::max(0.0, r.final_aperture - step));
      }
      bad += !ok;
      // Same object far beyond the fingertips.
      const RigidTransform away{pose.rotation, pose.translation + Vec3(0.5, 0, 0)};
      const auto miss = close_gripper_on_object(g, hull, away, CloseConfig{step});
      unreachable_bad += miss.contact || miss.final_aperture != 0.0;
    }
    std::vector<Vec3> sphere{{0, 0.03, 0}, {0, -0.03, 0}};
    for (int i = 1; i < 9; ++i)
      for (int j = 0; j < 16; ++j) {
        const double th = M_PI * i / 9, ph = 2 * M_PI * j / 16;
        sphere.emplace_back(0.03 * std::sin(th) * std::cos(ph), 0.03 * std::cos(th), 0.03 * std::sin(th) * std::sin(ph));
      }
    const auto ball = ConvexHullMesh::from_points(sphere);
    const auto sr = close_gripper_on_object(g, ball, RigidTransform::from_translation(g.grasp_point()), CloseConfig{0.01});
    o.expect(bad == 0, std::to_string(bad) + " hulls violate closing invariants");
    o.expect(unreachable_bad == 0, "unreachable objects");
    o.expect(sr.contact && std::abs(sr.final_aperture - 0.6) <= 0.01 + 1e-9, "60% sphere");
    o.detail << " contacts " << contacts << "/200, sphere aperture " << format_fixed(sr.final_aperture, 3);
  });

  run(8, "generation statistics over 1000 examples", kGenerationSeconds, [](Outcome& o) {
    const GenConfig cfg;
    const auto batches = generate_batches_parallel(8008, 100, cfg);
    std::size_t examples = 0, objects = 0;
    bool sizes_ok = true, counts_ok = true;
    for (const auto& b : batches) {
      sizes_ok = sizes_ok && b.examples.size() == 10;
      for (const auto& ex : b.examples) {
        ++examples;
        objects += ex.annotation.label == GraspLabel::kObject;
        const auto n = ex.scene.distractors.size();
        counts_ok = counts_ok && n >= 2 && n <= 15;
      }
    }
    const double frac = double(objects) / double(examples);
    const auto again = generate_batches_serial(8008, 100, cfg);
    bool identical = again.size() == batches.size();
    for (std::size_t i = 0; identical && i < batches.size(); ++i)
      identical = serialize_batch(again[i]) == serialize_batch(batches[i]);
    o.expect(examples == 1000, "1000 examples");
    o.expect(sizes_ok, "batch size 10");
    o.expect(counts_ok, "distractors in [2, 15]");
    o.expect(frac >= 0.45 && frac <= 0.55, "OBJECT fraction");
    o.expect(identical, "byte-identical regeneration");
    o.detail << " OBJECT fraction " << format_fixed(frac, 3) << ", regeneration identical " << (identical ? "yes" : "no");
  });

  run(9, "decision boundary and monotonicity", 0, [](Outcome& o) {
    const DecisionConfig real{0.15};
    o.expect(decide(0.15, real) == GraspLabel::kNoObject, "p = 0.15");
    o.expect(decide(0.1499999, real) == GraspLabel::kObject, "p = 0.1499999");
    o.expect(decide(std::nextafter(0.15, 0.0), real) == GraspLabel::kObject, "p just below 0.15");
    std::mt19937_64 rng(9009);
    std::uniform_real_distribution<double> p(0.0, 1.0), t(1e-6, 1 - 1e-6);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
      const double p1 = p(rng), p2 = p(rng), t1 = t(rng), t2 = t(rng);
      const double lo_p = std::min(p1, p2), hi_p = std::max(p1, p2);
      const DecisionConfig hi_t{std::max(t1, t2)}, lo_t{std::min(t1, t2)};
      violations += decide(lo_p, hi_t) == GraspLabel::kNoObject && decide(hi_p, hi_t) != GraspLabel::kNoObject;
      violations += decide(lo_p, hi_t) == GraspLabel::kNoObject && decide(lo_p, lo_t) != GraspLabel::kNoObject;
      violations += (decide(p1, hi_t) == GraspLabel::kNoObject) != (p1 >= hi_t.threshold_no_object);
    }
    o.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
    o.detail << " 10000 pairs, violations " << violations;
  });

  run(10, "VQA replay reproduces accuracy, P/R, latency and cost", 0, [](Outcome& o) {
    const Dataset d = load_dataset(fixture("real_eval"));
    auto client = ReplayClient::from_file(fixture("vqa/gpt4o_recording.jsonl"));
    const auto r = run_vqa_eval(d, *client, build_prompt(VqaConfig{}), 4);
    const auto t = classification_table(r.records);
    const auto pr = precision_recall(r.records);
    o.expect(r.complete && r.calls == 518, "518 calls");
    o.expect(format_fixed(t.at(Category::kNoObject).pct.value_or(-1), 1) == "95.0", "no_object 95.0");
    o.expect(format_fixed(t.at(Category::kRigid).pct.value_or(-1), 1) == "95.3", "rigid 95.3");
    o.expect(format_fixed(t.at(Category::kDeformable).pct.value_or(-1), 1) == "78.1", "deformable 78.1");
    o.expect(std::abs(pr.precision.value_or(-1) - 0.739) <= kMetricTol, "precision");
    o.expect(std::abs(pr.recall.value_or(-1) - 0.950) <= kMetricTol, "recall");
    o.expect(r.latency && r.latency->mean_ms == 2270.0, "mean 2270");
    o.expect(r.latency && r.latency->std_ms == 1530.0, "std 1530");
    o.expect(std::abs(r.total_cost - 0.518) <= kCostTol, "cost 0.518");
    o.detail << " mean " << (r.latency ? r.latency->mean_ms : -1) << " ms, std " << (r.latency ? r.latency->std_ms : -1)
             << " ms, cost " << format_fixed(r.total_cost, 3) << " " << r.currency << ", P=" << f3(pr.precision.value_or(-1))
             << " R=" << f3(pr.recall.value_or(-1)) << ", unparseable " << r.unparseable.size();
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
