#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "regionalign/error.hpp"
#include "regionalign/evalkit.hpp"
#include "regionalign/io.hpp"
#include "regionalign/report.hpp"
#include "regionalign/student.hpp"
#include "regionalign/synth.hpp"

namespace regionalign::cli {

namespace fs = std::filesystem;

namespace {

std::string indexed(std::size_t i) {
  std::ostringstream s;
  s << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + dir.string() + "': " + ec.message());
}

struct GenSynthArgs {
  std::string config;
  std::string out;
};

void cmd_gen_synth(const GenSynthArgs& a, std::ostream& out) {
  const io::ConfigFile cfg = io::load_config(a.config);
  if (!cfg.world) throw Error(ErrorCode::kInvalidConfiguration, "config has no 'world' section");
  const SyntheticWorld world = gen_world(*cfg.world);
  const fs::path root(a.out);
  make_dirs(root / "train");
  make_dirs(root / "eval");
  io::write_bank(root / "bank.ebk", world.bank);
  for (std::size_t i = 0; i < world.train.size(); ++i) {
    io::write_features(root / "train" / (indexed(i) + ".base.dfm"), world.train[i].base);
    io::write_features(root / "train" / (indexed(i) + ".teacher.dfm"), world.train[i].teacher);
  }
  for (std::size_t i = 0; i < world.eval.size(); ++i) {
    const fs::path stem = root / "eval" / indexed(i);
    io::write_features(stem.string() + ".base.dfm", world.eval[i].base);
    io::write_features(stem.string() + ".teacher.dfm", world.eval[i].teacher);
    io::write_annotations(stem.string() + ".ann", world.eval[i].records);
  }
  io::write_text(root / "world.json", io::to_json(*cfg.world) + "\n");
  out << "wrote " << world.train.size() << " train and " << world.eval.size()
      << " eval images to " << root.string() << "\n";
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const io::ConfigFile cfg = io::load_config(a.config);
  if (!cfg.train) throw Error(ErrorCode::kInvalidConfiguration, "config has no 'train' section");
  const fs::path data(a.data);
  const EmbeddingBank bank = io::read_bank(data / "bank.ebk");

  std::vector<fs::path> bases;
  std::error_code ec;
  for (fs::directory_iterator it(data / "train", ec), end; !ec && it != end; it.increment(ec)) {
    const std::string name = it->path().filename().string();
    if (name.size() > 9 && name.ends_with(".base.dfm")) bases.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::kIo, "cannot list '" + (data / "train").string() + "'");
  std::sort(bases.begin(), bases.end());

  std::vector<TrainingImage> images;
  for (const fs::path& base : bases) {
    std::string teacher = base.string();
    teacher.replace(teacher.size() - 9, 9, ".teacher.dfm");
    images.push_back({io::read_features(base), io::read_features(teacher)});
  }
  const TrainResult result = train(images, bank, bank, *cfg.train);
  const fs::path root(a.out);
  make_dirs(root);
  io::write_head(root / "head.ckpt", result.head);
  io::write_text(root / "train_log.json", io::train_log_json(result.log, *cfg.train));
  out << "trained " << result.log.size() << " steps on " << images.size() << " images; final loss "
      << (result.log.empty() ? 0.0 : result.log.back().image_loss) << "\n";
}

struct EvalArgs {
  std::vector<std::string> features;
  std::vector<std::string> ann;
  std::string bank;
  std::string head;
  std::string report;
  std::string out;
  std::string kind = "all";
  double tau = 0.01;
};

struct EvalInputs {
  EmbeddingBank bank;
  std::vector<FeatureMap> maps;
  std::vector<EvalRecord> records;
};

EvalInputs load_eval_inputs(const EvalArgs& a) {
  if (a.features.size() != a.ann.size()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "--features and --ann must be given the same number of files");
  }
  EvalInputs in{io::read_bank(a.bank), {}, {}};
  std::optional<StudentHead> head;
  if (!a.head.empty()) head = io::read_head(a.head);
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    FeatureMap map = io::read_features(a.features[i]);
    if (head) map = student_forward(map, *head);
    in.maps.push_back(std::move(map));
    for (EvalRecord r : io::read_annotations(a.ann[i])) {
      r.image = i;
      in.records.push_back(std::move(r));
    }
  }
  return in;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const EvalInputs in = load_eval_inputs(a);
  const AccuracyTable table = accuracy_table(in.records, in.maps, in.bank, a.tau);
  io::write_text(a.report, io::accuracy_report_json(table, in.bank));
  for (RecordKind kind : kAllRecordKinds) {
    out << record_kind_name(kind) << ": ";
    if (const auto& t1 = table.top1[kind]) {
      out << "top1=" << t1->mean << " top5=" << table.top5[kind]->mean << " records=" << t1->records;
    } else {
      out << "absent";
    }
    out << "\n";
  }
}

void cmd_confusion(const EvalArgs& a, std::ostream& out) {
  EvalInputs in = load_eval_inputs(a);
  if (a.kind != "all") {
    RecordKind wanted = RecordKind::kBox;
    if (a.kind == "boxes") wanted = RecordKind::kBox;
    else if (a.kind == "masks_thing") wanted = RecordKind::kMaskThing;
    else if (a.kind == "masks_stuff") wanted = RecordKind::kMaskStuff;
    else throw Error(ErrorCode::kInvalidConfiguration, "unknown --kind '" + a.kind + "'");
    std::erase_if(in.records, [&](const EvalRecord& r) { return r.kind != wanted; });
  }
  const ConfusionMatrix m = confusion(in.records, in.maps, in.bank, a.tau);
  io::write_text(a.out, io::confusion_csv(m, in.bank));
  out << "confusion over " << m.total() << " records, " << m.diagonal_sum() << " on the diagonal\n";
}

struct RetrieveArgs {
  std::string features;
  std::string bank;
  std::string grid;
  std::string out;
  double theta = 0.3;
  double tau = 0.01;
  std::uint64_t seed = 0;
  int max_grid = 6;
  int samples = kDefaultSamplesPerAxis;
};

GridShape parse_grid(const std::string& text) {
  GridShape g;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> g.rows >> sep >> g.cols) || (sep != 'x' && sep != 'X') || !in.eof() ||
      g.rows < 1 || g.cols < 1) {
    throw Error(ErrorCode::kInvalidConfiguration, "--grid must look like 3x4");
  }
  return g;
}

void cmd_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const FeatureMap map = io::read_features(a.features);
  const EmbeddingBank bank = io::read_bank(a.bank);
  GridShape grid;
  if (!a.grid.empty()) {
    grid = parse_grid(a.grid);
  } else {
    RandomStream rng(a.seed);
    grid = sample_grid(rng, a.max_grid);
  }
  const auto regions = partition_regions(map.height(), map.width(), grid);
  std::vector<std::vector<double>> feats;
  for (const RegionSpec& r : regions) feats.push_back(pool_region(map, r, a.samples));
  const auto assignments = retrieve(feats, regions, bank, {a.tau, a.theta});
  const std::string json = io::retrieval_json(assignments, bank, grid);
  if (a.out.empty()) {
    out << json;
  } else {
    io::write_text(a.out, json);
  }
}

void add_eval_options(CLI::App& cmd, EvalArgs& a) {
  cmd.add_option("--features", a.features, "Feature files, one per image")->required();
  cmd.add_option("--bank", a.bank, "Embedding bank file")->required();
  cmd.add_option("--ann", a.ann, "Annotation files, paired with --features")->required();
  cmd.add_option("--head", a.head, "Student head checkpoint applied to the features first");
  cmd.add_option("--tau", a.tau, "Softmax temperature")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Region-language alignment engine with decoupled thing/stuff distillation",
               "regionalign"};
  app.require_subcommand(1);

  GenSynthArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a synthetic biased world");
  gen_cmd->add_option("--config", gen.config, "JSON config with a 'world' section")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a student head against the teacher");
  train_cmd->add_option("--config", tr.config, "JSON config with a 'train' section")->required();
  train_cmd->add_option("--data", tr.data, "Directory written by gen-synth")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Top-1/Top-5 mean accuracy report");
  add_eval_options(*eval_cmd, ev);
  eval_cmd->add_option("--report", ev.report, "Output JSON report")->required();

  EvalArgs cf;
  auto* conf_cmd = app.add_subcommand("confusion", "Confusion matrix as CSV");
  add_eval_options(*conf_cmd, cf);
  conf_cmd->add_option("--out", cf.out, "Output CSV")->required();
  conf_cmd->add_option("--kind", cf.kind, "all | boxes | masks_thing | masks_stuff")
      ->capture_default_str();

  RetrieveArgs rt;
  auto* ret_cmd = app.add_subcommand("retrieve", "Assign grid regions to categories");
  ret_cmd->add_option("--features", rt.features, "Teacher feature file")->required();
  ret_cmd->add_option("--bank", rt.bank, "Embedding bank file")->required();
  ret_cmd->add_option("--theta", rt.theta, "Denoising threshold")->capture_default_str();
  ret_cmd->add_option("--tau", rt.tau, "Softmax temperature")->capture_default_str();
  ret_cmd->add_option("--grid", rt.grid, "Fixed grid RxC instead of sampling one");
  ret_cmd->add_option("--seed", rt.seed, "Seed for grid sampling")->capture_default_str();
  ret_cmd->add_option("--max-grid", rt.max_grid, "Largest sampled grid side")->capture_default_str();
  ret_cmd->add_option("--samples", rt.samples, "RoIAlign samples per axis")->capture_default_str();
  ret_cmd->add_option("--out", rt.out, "Write JSON here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    err << "error[usage] " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) cmd_gen_synth(gen, out);
    else if (train_cmd->parsed()) cmd_train(tr, out);
    else if (eval_cmd->parsed()) cmd_eval(ev, out);
    else if (conf_cmd->parsed()) cmd_confusion(cf, out);
    else if (ret_cmd->parsed()) cmd_retrieve(rt, out);
  } catch (const Error& e) {
    err << e.diagnostic() << "\n";
    return e.is_io() ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error[io] " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error[internal] " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace regionalign::cli
