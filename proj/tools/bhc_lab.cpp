// bhc_lab: runs one named experiment and writes <out>/<name>.csv and <out>/<name>.json.
// Exit status: 0 pass, 1 acceptance failure, 2 configuration or budget error.

#include "bhc/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;

json scalar_to_json(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "false") return s == "true";
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  try {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  return s;
}

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Map: {
      json j = json::object();
      for (const auto& kv : n) j[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return j;
    }
    case YAML::NodeType::Sequence: {
      json j = json::array();
      for (const auto& v : n) j.push_back(yaml_to_json(v));
      return j;
    }
    case YAML::NodeType::Scalar:
      return scalar_to_json(n);
    default:
      return nullptr;
  }
}

// A top-level "experiment" mapping may carry the settings; anything else is flat.
json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bhc::Error("config-error", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  if (std::filesystem::path(path).extension() == ".json") {
    try {
      j = json::parse(buf.str());
    } catch (const json::parse_error& ex) {
      throw bhc::Error("config-error", path + ": " + ex.what());
    }
  } else {
    try {
      j = yaml_to_json(YAML::Load(buf.str()));
    } catch (const YAML::Exception& ex) {
      throw bhc::Error("config-error", path + ": " + ex.what());
    }
  }
  if (j.is_null()) j = json::object();
  if (j.is_object() && j.contains("experiment") && j["experiment"].is_object()) {
    json inner = j["experiment"];
    j.erase("experiment");
    if (inner.contains("name")) {
      inner["experiment"] = inner["name"];
      inner.erase("name");
    }
    j.update(inner);
  }
  return j;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw bhc::Error("config-error", "cannot write " + p.string());
  out << bytes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bhc_lab: time-frequency experiments"};
  app.require_subcommand(1);

  CLI::App* list = app.add_subcommand("list", "print the experiment names");

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  std::string name, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, trials;
  std::optional<double> slack, a;
  std::optional<bhc::Index> grid;
  std::vector<int> am;
  bool quiet = false;
  run->add_option("name", name, "experiment name")->required();
  run->add_option("--config", config_path, "YAML or JSON configuration file");
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--workers", workers, "worker threads");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--slack", slack, "slack factor in acceptance checks");
  run->add_option("--am", am, "ladder of a*m values")->delimiter(',');
  run->add_option("--a", a, "exponent a");
  run->add_option("--trials", trials, "trial count");
  run->add_option("--grid", grid, "grid size (power of two)");
  run->add_flag("--quiet", quiet, "do not print the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*list) {
    for (const auto& n : bhc::experiment_names()) std::cout << n << '\n';
    return 0;
  }

  try {
    bhc::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = bhc::config_from_json(load_config(config_path));
    cfg.experiment = name;
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (slack) cfg.slack = *slack;
    if (a) cfg.a = *a;
    if (trials) cfg.trials = *trials;
    if (grid) cfg.grid = *grid;
    if (!am.empty()) cfg.am = am;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg = bhc::config_from_json(bhc::to_json(cfg));  // same validation as the file path

    const bhc::DecayReport r = bhc::run_experiment(cfg);

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (cfg.experiment + ".csv"), r.to_csv());
    json summary = r.summary();
    summary["config"] = bhc::to_json(bhc::with_defaults(cfg));
    write_file(dir / (cfg.experiment + ".json"), summary.dump(2) + "\n");
    if (!quiet) std::cout << summary.dump(2) << '\n';
    return r.pass ? 0 : 1;
  } catch (const bhc::Error& e) {
    std::cerr << "bhc_lab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bhc_lab: " << e.what() << '\n';
    return 2;
  }
}
