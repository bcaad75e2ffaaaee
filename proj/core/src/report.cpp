#include "regionalign/report.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

#include "regionalign/error.hpp"
#include "regionalign/io.hpp"

namespace regionalign::io {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kInvalidConfiguration, "config: " + what);
}

double get_real(const json& v, const std::string& key) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

template <typename Int>
Int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) config_error("'" + key + "' must be an integer");
  if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
  const auto s = v.get<std::int64_t>();
  if (s < 0 && std::is_unsigned_v<Int>) config_error("'" + key + "' must be >= 0");
  return static_cast<Int>(s);
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) config_error("'" + key + "' must be a boolean");
  return v.get<bool>();
}

WorldConfig parse_world(const json& obj) {
  if (!obj.is_object()) config_error("'world' must be an object");
  WorldConfig cfg;
  for (const auto& [key, v] : obj.items()) {
    if (key == "n_thing") cfg.n_thing = get_int<std::size_t>(v, key);
    else if (key == "n_stuff") cfg.n_stuff = get_int<std::size_t>(v, key);
    else if (key == "channels") cfg.channels = get_int<std::size_t>(v, key);
    else if (key == "map_height") cfg.map_height = get_int<std::size_t>(v, key);
    else if (key == "map_width") cfg.map_width = get_int<std::size_t>(v, key);
    else if (key == "n_train") cfg.n_train = get_int<std::size_t>(v, key);
    else if (key == "n_eval") cfg.n_eval = get_int<std::size_t>(v, key);
    else if (key == "segments") cfg.segments = get_int<std::size_t>(v, key);
    else if (key == "noise_sigma") cfg.noise_sigma = get_real(v, key);
    else if (key == "bias_beta") cfg.bias_beta = get_real(v, key);
    else if (key == "seed") cfg.seed = get_int<std::uint64_t>(v, key);
    else if (key == "cooccurrence") {
      if (!v.is_array()) config_error("'cooccurrence' must be an array of arrays");
      cfg.cooccurrence.clear();
      for (const auto& list : v) {
        if (!list.is_array()) config_error("'cooccurrence' must be an array of arrays");
        std::vector<std::size_t> things;
        for (const auto& t : list) things.push_back(get_int<std::size_t>(t, key));
        cfg.cooccurrence.push_back(std::move(things));
      }
    } else {
      config_error("unknown world key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

TrainConfig parse_train(const json& obj) {
  if (!obj.is_object()) config_error("'train' must be an object");
  TrainConfig cfg;
  for (const auto& [key, v] : obj.items()) {
    if (key == "tau") cfg.tau = get_real(v, key);
    else if (key == "theta") cfg.theta = get_real(v, key);
    else if (key == "max_grid") cfg.max_grid = get_int<int>(v, key);
    else if (key == "epochs") cfg.epochs = get_int<int>(v, key);
    else if (key == "batch_size") cfg.batch_size = get_int<int>(v, key);
    else if (key == "learning_rate") cfg.learning_rate = get_real(v, key);
    else if (key == "beta1") cfg.beta1 = get_real(v, key);
    else if (key == "beta2") cfg.beta2 = get_real(v, key);
    else if (key == "weight_decay") cfg.weight_decay = get_real(v, key);
    else if (key == "warmup_steps") cfg.warmup_steps = get_int<int>(v, key);
    else if (key == "seed") cfg.seed = get_int<std::uint64_t>(v, key);
    else if (key == "samples_per_axis") cfg.samples_per_axis = get_int<int>(v, key);
    else if (key == "hidden") cfg.hidden = get_bool(v, key);
    else if (key == "support") {
      if (v == "decoupled") cfg.support = SupportMode::kDecoupled;
      else if (v == "coupled") cfg.support = SupportMode::kCoupled;
      else config_error("'support' must be \"decoupled\" or \"coupled\"");
    } else {
      config_error("unknown train key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

json world_json(const WorldConfig& cfg) {
  return json{{"n_thing", cfg.n_thing},         {"n_stuff", cfg.n_stuff},
              {"channels", cfg.channels},       {"map_height", cfg.map_height},
              {"map_width", cfg.map_width},     {"n_train", cfg.n_train},
              {"n_eval", cfg.n_eval},           {"segments", cfg.segments},
              {"noise_sigma", cfg.noise_sigma}, {"bias_beta", cfg.bias_beta},
              {"cooccurrence", cfg.cooccurrence}, {"seed", cfg.seed}};
}

json train_json(const TrainConfig& cfg) {
  return json{{"tau", cfg.tau},
              {"theta", cfg.theta},
              {"max_grid", cfg.max_grid},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"weight_decay", cfg.weight_decay},
              {"warmup_steps", cfg.warmup_steps},
              {"seed", cfg.seed},
              {"samples_per_axis", cfg.samples_per_axis},
              {"hidden", cfg.hidden},
              {"support", cfg.support == SupportMode::kCoupled ? "coupled" : "decoupled"}};
}

}  // namespace

ConfigFile parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) config_error("top level must be an object");
  ConfigFile out;
  for (const auto& [key, v] : root.items()) {
    if (key == "world") out.world = parse_world(v);
    else if (key == "train") out.train = parse_train(v);
    else config_error("unknown top-level key '" + key + "'");
  }
  return out;
}

ConfigFile load_config(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string to_json(const WorldConfig& cfg) { return world_json(cfg).dump(2); }
std::string to_json(const TrainConfig& cfg) { return train_json(cfg).dump(2); }

std::string accuracy_report_json(const AccuracyTable& table, const EmbeddingBank& bank) {
  json kinds = json::object();
  for (RecordKind kind : kAllRecordKinds) {
    const auto& top1 = table.top1[kind];
    const auto& top5 = table.top5[kind];
    const std::string name(record_kind_name(kind));
    if (!top1 || !top5) {
      kinds[name] = nullptr;
      continue;
    }
    json categories = json::array();
    for (std::size_t i = 0; i < top1->categories.size(); ++i) {
      const CategoryAccuracy& c1 = top1->categories[i];
      const CategoryAccuracy& c5 = top5->categories[i];
      categories.push_back({{"category", bank.names().at(c1.category)},
                            {"index", c1.category},
                            {"records", c1.records},
                            {"top1", c1.accuracy()},
                            {"top5", c5.accuracy()}});
    }
    kinds[name] = {{"records", top1->records},
                   {"top1", top1->mean},
                   {"top5", top5->mean},
                   {"categories", std::move(categories)}};
  }
  return json{{"kinds", std::move(kinds)}}.dump(2) + "\n";
}

std::string train_log_json(std::span<const TrainLogEntry> log, const TrainConfig& cfg) {
  json steps = json::array();
  for (const TrainLogEntry& e : log) {
    steps.push_back({{"step", e.step},
                     {"epoch", e.epoch},
                     {"lr", e.lr},
                     {"image_loss", e.image_loss},
                     {"kept", e.kept_count},
                     {"discarded", e.discarded_count}});
  }
  return json{{"config", train_json(cfg)}, {"steps", std::move(steps)}}.dump(2) + "\n";
}

std::string confusion_csv(const ConfusionMatrix& matrix, const EmbeddingBank& bank) {
  if (matrix.size() != bank.size()) {
    throw Error(ErrorCode::kShape, "confusion matrix size differs from bank size");
  }
  std::ostringstream out;
  out << "gt\\pred";
  for (const auto& name : bank.names()) out << ',' << name;
  out << '\n';
  for (std::size_t g = 0; g < matrix.size(); ++g) {
    out << bank.names()[g];
    for (std::size_t p = 0; p < matrix.size(); ++p) out << ',' << matrix.at(g, p);
    out << '\n';
  }
  return out.str();
}

std::string retrieval_json(std::span<const RegionAssignment> assignments,
                           const EmbeddingBank& bank, const GridShape& grid) {
  json regions = json::array();
  std::size_t kept = 0;
  for (const RegionAssignment& a : assignments) {
    kept += a.kept ? 1 : 0;
    regions.push_back({{"region", a.region_index},
                       {"box", {a.region.x0, a.region.y0, a.region.x1, a.region.y1}},
                       {"category", bank.names().at(a.category_index)},
                       {"index", a.category_index},
                       {"prob", a.teacher_max_prob},
                       {"kept", a.kept}});
  }
  return json{{"grid", {grid.rows, grid.cols}},
              {"region_count", assignments.size()},
              {"kept_count", kept},
              {"regions", std::move(regions)}}
             .dump(2) +
         "\n";
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace regionalign::io
