// mgtad: command-line front end for synthesis, training, detection and analysis.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mgtad/augment.hpp"
#include "mgtad/data.hpp"
#include "mgtad/diagnose.hpp"
#include "mgtad/errors.hpp"
#include "mgtad/eval.hpp"
#include "mgtad/infer.hpp"
#include "mgtad/model.hpp"
#include "mgtad/svg.hpp"
#include "mgtad/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mgtad;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t test = 0;
};

int run_synth(const SynthArgs& a) {
  SynthSpec spec;
  if (!a.spec.empty()) spec = read_json(a.spec).get<SynthSpec>();
  const SynthDataset ds = synth_generate(spec, a.seed);
  if (a.test > ds.videos.size()) {
    throw std::invalid_argument("--test exceeds the number of videos");
  }
  const auto split = ds.videos.end() - static_cast<std::ptrdiff_t>(a.test);
  if (a.test > 0) {
    write_split({ds.videos.begin(), split}, fs::path(a.out) / "train", "train");
    write_split({split, ds.videos.end()}, fs::path(a.out) / "test", "test");
  } else {
    write_split(ds.videos, a.out, "train");
  }
  json meta{{"spec", spec}, {"seed", a.seed}, {"test_videos", a.test}};
  write_json(fs::path(a.out) / "synth.json", meta);
  std::printf("wrote %zu videos to %s\n", ds.videos.size(), a.out.c_str());
  return 0;
}

struct StatsArgs {
  std::string gt;
  std::size_t classes = 0;
  std::string out;
  std::string svg;
};

int run_stats(const StatsArgs& a) {
  const auto videos = load_annotations(a.gt);
  std::size_t k = a.classes;
  if (k == 0) {
    for (const auto& v : videos) {
      for (const auto& i : v.instances) k = std::max<std::size_t>(k, static_cast<std::size_t>(i.label) + 1);
    }
  }
  std::vector<VideoAnnotation> originals = videos;
  for (auto& v : originals) std::erase_if(v.instances, [](const auto& i) { return i.duplicate; });
  const auto hist = class_histogram(originals, k);
  std::size_t total = 0;
  for (auto h : hist) total += h;
  json j{{"videos", videos.size()}, {"instances", total}, {"classes", json::array()}};
  for (std::size_t c = 0; c < k; ++c) {
    j["classes"].push_back({{"label", c},
                            {"count", hist[c]},
                            {"fraction", total ? static_cast<double>(hist[c]) / total : 0.0}});
  }
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(a.out, j);
  }
  if (!a.svg.empty()) {
    svg::BarChart chart;
    chart.title = "Instances per category";
    chart.y_label = "instances";
    chart.series.push_back({"count", {}});
    for (std::size_t c = 0; c < k; ++c) {
      chart.categories.push_back(std::to_string(c));
      chart.series[0].values.push_back(static_cast<double>(hist[c]));
    }
    write_text(a.svg, svg::render(chart));
  }
  return 0;
}

struct AugmentArgs {
  std::uint64_t alpha = 100;
  std::size_t classes = 0;
  std::string in, out, plan;
};

int run_augment(const AugmentArgs& a) {
  const auto videos = load_annotations(a.in);
  std::size_t k = a.classes;
  if (k == 0) {
    for (const auto& v : videos) {
      for (const auto& i : v.instances) k = std::max<std::size_t>(k, static_cast<std::size_t>(i.label) + 1);
    }
  }
  AugmentConfig cfg;
  cfg.alpha = a.alpha;
  const AugmentResult res = augment_annotations(videos, k, cfg);
  save_annotations(res.annotations, a.out);
  if (!a.plan.empty()) write_json(a.plan, res.plan);
  for (const auto& c : res.plan.categories) {
    std::printf("class %d: %llu instances, x%llu%s\n", c.label,
                static_cast<unsigned long long>(c.count),
                static_cast<unsigned long long>(c.replication), c.rare ? " (rare)" : "");
  }
  return 0;
}

struct TrainArgs {
  std::string config, data, out;
};

int run_train(const TrainArgs& a) {
  const json cfg = a.config.empty() ? json::object() : read_json(a.config);
  const ModelConfig mc = cfg.value("model", json::object()).get<ModelConfig>();
  const TrainConfig tc = cfg.value("train", json::object()).get<TrainConfig>();
  const std::string ann = cfg.value("annotations", std::string("train.jsonl"));
  auto loaded = load_split(a.data, ann);
  std::vector<VideoAnnotation> annotations;
  for (const auto& v : loaded) annotations.push_back(v.annotation);
  if (cfg.contains("augment")) {
    for (const auto& v : annotations) {
      for (const auto& i : v.instances) {
        if (i.duplicate) {
          throw std::invalid_argument(ann + " is already augmented; drop the augment key");
        }
      }
    }
    AugmentConfig ac;
    ac.alpha = cfg["augment"].value("alpha", ac.alpha);
    annotations = augment_annotations(annotations, mc.num_classes, ac).annotations;
  }
  std::vector<std::pair<VideoAnnotation, Grid>> data;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    data.emplace_back(annotations[i], std::move(loaded[i].features));
  }
  Model model(mc);
  model.init(tc.seed);
  const auto samples = make_samples(data, model, tc);
  std::printf("training on %zu videos, %zu parameters\n", samples.size(), model.parameter_count());
  fit(model, samples, tc, [](const EpochStats& e) {
    std::printf("epoch %3zu  loss %.4f  cls %.4f  reg %.4f\n", e.epoch, e.loss, e.classification,
                e.regression);
    std::fflush(stdout);
  });
  save_model(model, a.out, tc);
  return 0;
}

struct DetectArgs {
  std::string model;
  std::vector<std::string> features;
  std::string out;
  std::string config;
  bool stream = false;
  double fps = 28.0;
  int stride = 4;
  std::optional<std::size_t> window;
  std::optional<double> report_threshold;
};

int run_detect(const DetectArgs& a) {
  const Model model = load_model(a.model);
  InferConfig ic;
  if (!a.config.empty()) ic = read_json(a.config).get<InferConfig>();
  if (a.window) ic.window = *a.window;
  if (a.report_threshold) ic.report_threshold = *a.report_threshold;
  ic.validate();
  const Timing timing{a.fps, a.stride};

  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  std::size_t total = 0;
  for (const auto& path : a.features) {
    const std::string id = fs::path(path).stem().string();
    auto emit = [&](const std::vector<Detection>& dets) {
      DetectionSet one{{id, dets}};
      out << format_predictions(one);
      out.flush();
      total += dets.size();
    };
    if (a.stream) {
      FileSource src(path);
      detect_stream(src, model, timing, ic, emit);
    } else {
      emit(detect_offline(model, load_features(path), timing, ic));
    }
  }
  std::printf("%zu detections in %zu file(s)\n", total, a.features.size());
  return 0;
}

struct EvalArgs {
  std::string preds, gt, out;
  double tiou = 0.5;
};

int run_eval(const EvalArgs& a) {
  const EvalReport rep = evaluate(load_predictions(a.preds), load_annotations(a.gt), a.tiou);
  const json j = report_json(rep);
  if (!a.out.empty()) write_json(a.out, j);
  std::printf("P %.2f  R %.2f  F1 %.2f  (tIoU %.2f, %zu matched / %zu predictions / %zu gt)\n",
              100 * rep.overall.precision, 100 * rep.overall.recall, 100 * rep.overall.f1,
              a.tiou, rep.total.matched, rep.total.preds, rep.total.gts);
  return 0;
}

struct DiagnoseArgs {
  std::string preds, gt, out, svg;
  double tiou = 0.5;
};

int run_diagnose(const DiagnoseArgs& a) {
  const DiagnosisReport rep = diagnose(load_predictions(a.preds), load_annotations(a.gt), a.tiou);
  write_json(a.out, report_json(rep));
  if (!a.svg.empty()) write_svg_charts(rep, a.svg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-gesture temporal action detection"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic feature corpus");
  s->add_option("--spec", synth.spec, "SynthSpec JSON (defaults if omitted)")->check(CLI::ExistingFile);
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--test", synth.test, "Hold out the last N videos; writes train/ and test/ subdirectories");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Per-category instance histogram");
  st->add_option("--gt", stats.gt, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  st->add_option("--classes", stats.classes, "Number of classes (inferred if 0)");
  st->add_option("--out", stats.out, "JSON output (stdout if omitted)");
  st->add_option("--svg", stats.svg, "Bar chart output");

  AugmentArgs aug;
  auto* au = app.add_subcommand("augment", "Replicate annotations of rare categories");
  au->add_option("--alpha", aug.alpha, "Minimum instance threshold")->check(CLI::PositiveNumber);
  au->add_option("--classes", aug.classes, "Number of classes (inferred if 0)");
  au->add_option("--in", aug.in, "Input annotation JSONL")->required()->check(CLI::ExistingFile);
  au->add_option("--out", aug.out, "Augmented annotation JSONL")->required();
  au->add_option("--plan", aug.plan, "Replication plan JSON");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a detector");
  tr->add_option("--config", train.config, "JSON with model/train/annotations/augment keys")
      ->check(CLI::ExistingFile);
  tr->add_option("--data", train.data, "Split directory with features/")->required()
      ->check(CLI::ExistingDirectory);
  tr->add_option("--out", train.out, "Model file")->required();

  DetectArgs det;
  auto* de = app.add_subcommand("detect", "Run a trained model over feature files");
  de->add_option("--model", det.model, "Model file")->required()->check(CLI::ExistingFile);
  de->add_option("--features", det.features, "Feature files; video id = file stem")
      ->required()->check(CLI::ExistingFile);
  de->add_option("--out", det.out, "Predictions JSONL")->required();
  de->add_option("--config", det.config, "InferConfig JSON")->check(CLI::ExistingFile);
  de->add_flag("--stream", det.stream, "Read incrementally and emit detections as they settle");
  de->add_option("--fps", det.fps, "Video frame rate");
  de->add_option("--stride", det.stride, "Frames per feature step");
  de->add_option("--window", det.window, "Window length in feature steps");
  de->add_option("--report-threshold", det.report_threshold, "Minimum reported score");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Precision, recall and F1 at a tIoU threshold");
  e->add_option("--preds", ev.preds, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  e->add_option("--tiou", ev.tiou, "tIoU threshold")->check(CLI::Range(0.0, 1.0));
  e->add_option("--out", ev.out, "Report JSON");

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "False positive / false negative / sensitivity analysis");
  d->add_option("--preds", dg.preds, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  d->add_option("--gt", dg.gt, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  d->add_option("--tiou", dg.tiou, "tIoU threshold")->check(CLI::Range(0.0, 1.0));
  d->add_option("--out", dg.out, "Report JSON")->required();
  d->add_option("--svg", dg.svg, "Directory for SVG charts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return run_synth(synth);
    if (*st) return run_stats(stats);
    if (*au) return run_augment(aug);
    if (*tr) return run_train(train);
    if (*de) return run_detect(det);
    if (*e) return run_eval(ev);
    if (*d) return run_diagnose(dg);
  } catch (const FormatError& err) {
    std::fprintf(stderr, "format error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
