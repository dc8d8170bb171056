#include "graspcheck/cli.hpp"

#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "graspcheck/backends.hpp"
#include "graspcheck/config.hpp"
#include "graspcheck/error.hpp"
#include "graspcheck/eval_metrics.hpp"
#include "graspcheck/pipeline.hpp"
#include "graspcheck/scene_synth.hpp"
#include "graspcheck/vqa.hpp"
#include "json_util.hpp"

namespace graspcheck {

namespace fs = std::filesystem;
using detail::Json;

namespace {

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

struct GenerateArgs {
  std::string config;
  std::string out;
  int num_batches = 0;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool serial = false;
  bool force = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  const fs::path target(a.out);
  if (fs::exists(target) && !fs::is_empty(target) && !a.force) {
    throw Error(ErrorKind::kInvalidArgument, target.string() + " is not empty (use --force to replace it)");
  }
  const fs::path staging = target.string() + ".partial";
  fs::remove_all(staging);
  try {
    const auto batches = a.serial ? generate_batches_serial(a.seed, a.num_batches, cfg.gen)
                                  : generate_batches_parallel(a.seed, a.num_batches, cfg.gen, a.jobs);
    const Dataset d = write_generated_dataset(batches, cfg.gen, staging);
    fs::remove_all(target);
    fs::rename(staging, target);
    const auto counts = category_counts(d);
    std::size_t min_d = 0, max_d = 0;
    bool first = true;
    for (const auto& b : batches) {
      if (b.examples.empty()) continue;
      const std::size_t n = b.examples.front().scene.distractors.size();
      min_d = first ? n : std::min(min_d, n);
      max_d = first ? n : std::max(max_d, n);
      first = false;
    }
    out << "generated " << d.examples.size() << " examples in " << batches.size() << " batches -> "
        << target.string() << "\n"
        << "  object: " << counts.at(Category::kRigid) << ", no_object: " << counts.at(Category::kNoObject) << "\n";
    if (!first) out << "  distractors per scene: " << min_d << ".." << max_d << "\n";
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return kExitOk;
}

struct InferArgs {
  std::string config;
  std::string dataset;
  std::string detector;
  std::string classifier;
  std::string out = "verdicts.jsonl";
  std::optional<double> threshold_no_object;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (a.threshold_no_object) cfg.threshold_no_object = *a.threshold_no_object;
  cfg.validate();
  const Dataset dataset = load_dataset(a.dataset);
  cfg.pipeline.decision = cfg.decision_for(dataset.split);
  auto detector = make_detector(a.detector);
  auto classifier = make_classifier(a.classifier);
  const auto rows = run_inference(dataset, *detector, *classifier, cfg.pipeline);
  save_verdicts(rows, a.out);
  const auto missing = std::count_if(rows.begin(), rows.end(), [](const VerdictRow& r) { return !r.verdict; });
  out << "verdicts: " << rows.size() << " (ok " << rows.size() - missing << ", gripper_not_found " << missing
      << ") -> " << a.out << "\n";
  return kExitOk;
}

struct Model {
  std::string name;
  std::vector<EvalRecord> records;
  std::optional<std::vector<EvalRecord>> pr_records;
};

std::pair<std::string, std::string> split_named(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct EvaluateArgs {
  std::string config;
  std::vector<std::string> records;
  std::vector<std::string> pr_records;
  std::string verdicts;
  std::string dataset;
  std::string review;
  std::string name = "pipeline";
  std::string write_records;
  std::string json;
  std::string classification_population;
  std::string pr_population;
  std::optional<double> tolerance;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (!a.classification_population.empty()) {
    cfg.eval.classification_population = population_from_string(a.classification_population);
  }
  if (!a.pr_population.empty()) cfg.eval.pr_population = population_from_string(a.pr_population);
  if (a.tolerance) cfg.eval.consistency_tolerance = *a.tolerance;
  if (!a.review.empty()) cfg.eval.review = a.review;

  std::vector<Model> models;
  if (!a.verdicts.empty()) {
    if (!cfg.eval.review) throw Error(ErrorKind::kMissingGroundTruth, "--review (or eval.review) is required");
    const Dataset dataset = load_dataset(a.dataset);
    models.push_back({a.name, build_records(dataset, load_verdicts(a.verdicts), *cfg.eval.review), std::nullopt});
    if (!a.write_records.empty()) save_records(models.back().records, a.write_records);
  }
  for (const auto& spec : a.records) {
    auto [name, path] = split_named(spec);
    models.push_back({name, load_records(path), std::nullopt});
  }
  for (const auto& spec : a.pr_records) {
    auto [name, path] = split_named(spec);
    auto it = std::find_if(models.begin(), models.end(), [&](const Model& m) { return m.name == name; });
    if (it == models.end()) {
      models.push_back({name, {}, load_records(path)});
    } else {
      it->pr_records = load_records(path);
    }
  }

  Json report = Json::object();
  report["models"] = Json::array();
  const Model& first = models.front();
  const DetectionTable t1 = detection_table(first.records);
  out << "Detection (" << first.name << ")\n" << detection_table_text(t1) << "\n";

  std::vector<std::pair<std::string, ClassificationTable>> t2;
  std::vector<std::pair<std::string, PRScore>> t3;
  std::vector<std::pair<std::string, ConsistencyReport>> oracle;
  for (const auto& m : models) {
    Json mj;
    mj["name"] = m.name;
    std::optional<ClassificationTable> acc;
    if (!m.records.empty()) {
      acc = classification_table(m.records, cfg.eval.classification_population);
      t2.emplace_back(m.name, *acc);
      mj["detection"] = detection_table_json(detection_table(m.records));
      mj["classification"] = classification_table_json(*acc);
    }
    const auto& pr_source = m.pr_records ? *m.pr_records : m.records;
    const PRScore pr = precision_recall(pr_source, cfg.eval.pr_population);
    t3.emplace_back(m.name, pr);
    mj["precision_recall"] = pr_json(pr);
    if (acc && std::all_of(acc->begin(), acc->end(), [](const auto& kv) { return kv.second.pct.has_value(); })) {
      CategoryCounts counts;
      std::map<Category, double> pct;
      for (const auto& r : m.records) ++counts[r.category];
      for (const auto& [cat, cell] : *acc) pct[cat] = *cell.pct;
      const auto rep = check_consistency(pr, derive_pr_from_accuracies(counts, pct), cfg.eval.consistency_tolerance);
      oracle.emplace_back(m.name, rep);
      mj["consistency"] = consistency_json(rep);
    }
    report["models"].push_back(std::move(mj));
  }
  out << "Classification accuracy (%)\n" << classification_table_text(t2) << "\n";
  out << "Precision / recall (positive class no_object)\n" << pr_table_text(t3) << "\n";
  out << "Cross-table consistency\n";
  for (const auto& [name, rep] : oracle) out << "  " << name << ": " << rep.summary << "\n";
  if (!a.json.empty()) detail::write_file(a.json, report.dump(2) + "\n");
  return kExitOk;
}

struct VqaArgs {
  std::string config;
  std::string dataset;
  std::string client;
  std::string out = "vqa_out";
  std::optional<int> jobs;
};

int cmd_vqa(const VqaArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(a.config);
  if (a.jobs) cfg.vqa.prompt.jobs = *a.jobs;
  if (!a.client.empty()) cfg.vqa.client = a.client;
  cfg.validate();
  if (!cfg.vqa.client) throw Error(ErrorKind::kInvalidArgument, "--client (or vqa.client) is required");
  const VqaPrompt prompt = build_prompt(cfg.vqa.prompt);
  const Dataset dataset = load_dataset(a.dataset);
  auto client = make_vqa_client(*cfg.vqa.client);
  const VqaRunResult result = run_vqa_eval(dataset, *client, prompt, cfg.vqa.prompt.jobs);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_records(result.records, dir / "vqa_records.jsonl");
  const Json summary = vqa_summary_json(result, prompt);
  detail::write_file(dir / "vqa_summary.json", summary.dump(2) + "\n");

  out << "calls: " << result.calls << ", unparseable: " << result.unparseable.size() << "\n";
  if (result.latency) {
    out << "latency: mean " << format_fixed(result.latency->mean_ms, 1) << " ms, std "
        << format_fixed(result.latency->std_ms, 1) << " ms\n";
  }
  out << "total cost: " << format_fixed(result.total_cost, 3) << " " << result.currency << "\n";
  if (!result.records.empty()) {
    out << classification_table_text({{"vqa", classification_table(result.records)}});
    out << pr_table_text({{"vqa", precision_recall(result.records)}});
  }
  if (!result.complete) {
    err << "error: VQA run aborted, partial results written: " << result.failure << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grasp verification toolkit: scene generation, two-stage inference, evaluation, VQA baseline"};
  app.require_subcommand(1);
  const std::string keys = config_key_help();
  const std::string exit_codes = "\nExit codes: 0 success, 1 usage error, 2 runtime failure.\n";

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "write scene specs and a manifest");
  gen->add_option("--config", ga.config, "YAML or JSON run config")->check(CLI::ExistingFile);
  gen->add_option("--out", ga.out, "output directory")->required();
  gen->add_option("--num-batches", ga.num_batches, "number of scenes")->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", ga.seed, "base seed")->capture_default_str();
  gen->add_option("--jobs", ga.jobs, "worker threads, 0 = all cores")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_flag("--serial", ga.serial, "use the single-threaded reference path");
  gen->add_flag("--force", ga.force, "replace a non-empty output directory");
  gen->footer(keys + exit_codes);

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "run the two-stage pipeline over a dataset");
  inf->add_option("--config", ia.config, "YAML or JSON run config")->check(CLI::ExistingFile);
  inf->add_option("--dataset", ia.dataset, "dataset directory with manifest.jsonl")->required();
  inf->add_option("--detector", ia.detector, "detector backend, fixture:<path>")->required();
  inf->add_option("--classifier", ia.classifier, "classifier backend, fixture:<path>")->required();
  inf->add_option("--out", ia.out, "verdicts file")->capture_default_str();
  inf->add_option("--threshold-no-object", ia.threshold_no_object, "overrides decide.threshold_no_object");
  inf->footer(keys + exit_codes);

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "print detection, accuracy and precision/recall tables");
  ev->add_option("--config", ea.config, "YAML or JSON run config")->check(CLI::ExistingFile);
  ev->add_option("--records", ea.records, "[NAME=]records.jsonl, repeatable");
  ev->add_option("--pr-records", ea.pr_records, "[NAME=]records.jsonl used only for precision/recall");
  auto* verd = ev->add_option("--verdicts", ea.verdicts, "verdicts.jsonl from infer");
  auto* ds = ev->add_option("--dataset", ea.dataset, "dataset the verdicts belong to");
  verd->needs(ds);
  ds->needs(verd);
  ev->add_option("--review", ea.review, "manual detection review (JSON-lines)");
  ev->add_option("--name", ea.name, "model name for the verdicts")->capture_default_str();
  ev->add_option("--write-records", ea.write_records, "save the joined records");
  ev->add_option("--json", ea.json, "write all tables as JSON");
  ev->add_option("--classification-population", ea.classification_population,
                 "predicted | detected_and_predicted");
  ev->add_option("--pr-population", ea.pr_population, "predicted | detected_and_predicted");
  ev->add_option("--tolerance", ea.tolerance, "consistency tolerance");
  ev->footer(keys + exit_codes);

  VqaArgs va;
  auto* vq = app.add_subcommand("vqa", "zero-shot VQA baseline over a dataset");
  vq->add_option("--config", va.config, "YAML or JSON run config")->check(CLI::ExistingFile);
  vq->add_option("--dataset", va.dataset, "dataset directory")->required();
  vq->add_option("--client", va.client, "replay:<path> or live:<model>");
  vq->add_option("--out", va.out, "output directory")->capture_default_str();
  vq->add_option("--jobs", va.jobs, "concurrent calls");
  vq->footer(keys + "\nLive client environment: " + std::string(kVqaApiKeyEnv) + " (required), " +
             kVqaEndpointEnv + " (optional base URL).\n" + exit_codes);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (ev->parsed() && ea.records.empty() && ea.pr_records.empty() && ea.verdicts.empty()) {
    err << "evaluate: give --records or --verdicts with --dataset\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(ga, out);
    if (inf->parsed()) return cmd_infer(ia, out);
    if (ev->parsed()) return cmd_evaluate(ea, out);
    return cmd_vqa(va, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace graspcheck
