#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "guiguard/dataset.hpp"
#include "guiguard/error.hpp"
#include "guiguard/gateway.hpp"
#include "guiguard/harness.hpp"
#include "guiguard/image.hpp"
#include "guiguard/report.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace guiguard;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfigError, path.string() + " is not valid JSON");
  return j;
}

struct RunFlags {
  std::string config;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "run config (JSON)")->required();
  cmd->add_option("--jobs", f.jobs, "parallel trajectories")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "global seed (overrides config)");
  cmd->add_option("--out", f.out, "output directory (overrides config)");
}

RunConfig load_config(const RunFlags& f) {
  json j = read_json(f.config);
  if (f.seed && j.is_object()) j["seed"] = *f.seed;
  RunConfig c = run_config_from_json(j, fs::absolute(f.config).parent_path());
  if (f.jobs) c.jobs = *f.jobs;
  if (f.out) c.output_dir = fs::absolute(*f.out);
  std::cerr << "seed: " << c.seed << "\n";
  return c;
}

void finish(const json& report, const RunConfig& c) {
  const auto files = report::emit(report, c.output_dir);
  std::cout << report::render_text(report);
  for (const auto& f : files) std::cerr << "wrote " << f.string() << "\n";
}

std::string join_names(auto names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + std::string(n);
  return out;
}

ProtectionPolicy policy_from_flags(const std::optional<std::string>& policy_file, const std::string& scope,
                                   const std::string& op, std::optional<std::uint64_t> seed) {
  json j = policy_file ? read_json(*policy_file) : json::object();
  if (!scope.empty()) j["scope"] = scope;
  if (!op.empty()) j["operator"] = op;
  if (seed) j["seed"] = *seed;
  const auto s = j.value("scope", std::string("full_risk"));
  const auto o = j.value("operator", std::string("black_mask"));
  if (!parse_scope(s)) {
    std::vector<std::string_view> names;
    for (auto v : kAllScopes) names.push_back(scope_name(v));
    throw UsageError("unknown policy '" + s + "'; valid policies: " + join_names(names));
  }
  if (!parse_operator(o)) {
    std::vector<std::string_view> names;
    for (auto v : kAllOperators) names.push_back(operator_name(v));
    throw UsageError("unknown operator '" + o + "'; valid operators: " + join_names(names));
  }
  try {
    return policy_from_json(j);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<PrivacyElement> elements_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(ErrorCode::kSchemaViolation, where + ": expected an array of elements");
  std::vector<PrivacyElement> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(element_from_json(arr[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

int run_protect(const fs::path& in, const std::optional<std::string>& elements_file, const ProtectionPolicy& policy,
                const fs::path& out_dir) {
  // (image path, elements) jobs in a stable order.
  std::vector<std::pair<fs::path, std::vector<PrivacyElement>>> work;
  std::string scope = in.filename().string();
  if (fs::is_directory(in)) {
    if (!elements_file && fs::exists(in / kManifestName)) {
      const Trajectory t = load_trajectory(in / kManifestName);
      scope = t.id;
      for (const auto& s : t.steps) work.emplace_back(t.image_path(s), s.elements);
    } else {
      if (!elements_file) throw UsageError("--elements is required for a directory without " + std::string(kManifestName));
      const json j = read_json(*elements_file);
      if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, *elements_file + ": expected {\"<image>\": [elements]}");
      std::vector<fs::path> images;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) images.push_back(entry.path());
      }
      std::sort(images.begin(), images.end());
      for (const auto& img : images) {
        const auto name = img.filename().string();
        work.emplace_back(img, j.contains(name) ? elements_from(j[name], name) : std::vector<PrivacyElement>{});
      }
    }
  } else {
    if (!elements_file) throw UsageError("--elements is required for a single image");
    const json j = read_json(*elements_file);
    const auto name = in.filename().string();
    work.emplace_back(in, elements_from(j.is_object() && j.contains(name) ? j[name] : j, name));
  }

  fs::create_directories(out_dir);
  ReplacementMemory memory(scope);
  json index = json::array();
  for (const auto& [path, elements] : work) {
    const auto result = protect(load_image(path), elements, policy, &memory);
    const auto stem = path.stem().string();
    save_png(result.image, out_dir / (stem + ".png"));
    json rep = report_to_json(result.report);
    rep["image"] = path.filename().string();
    std::ofstream(out_dir / (stem + ".report.json")) << report::dump(rep);
    index.push_back(std::move(rep));
    std::cout << path.filename().string() << ": " << result.report.regions.size() << " region(s) protected\n";
  }
  json mem = json::array();
  for (const auto& e : memory.snapshot()) mem.push_back({{"original", e.original}, {"pseudonym", e.pseudonym}});
  std::ofstream(out_dir / "protect_report.json")
      << report::dump({{"policy", policy_to_json(policy)}, {"images", std::move(index)}, {"memory", std::move(mem)}});
  std::cerr << "seed: " << policy.seed << "\n";
  return kOk;
}

GatewayServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& listen, const std::optional<std::string>& detector_arg,
              const std::optional<std::string>& detector_model, const std::optional<std::string>& policy_file,
              int ttl, const std::optional<std::string>& token, const std::string& detect_mode) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects host:port");
  const std::string host = listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (...) {
    throw UsageError("--listen expects host:port");
  }

  GatewayConfig cfg;
  cfg.session_ttl = std::chrono::seconds(ttl);
  cfg.access_log = &std::cout;
  if (token) cfg.bearer_token = *token;
  auto mode = parse_strategy(detect_mode);
  if (!mode) throw UsageError("--detect-mode must be joint or decomposed");
  cfg.detect_mode = *mode;
  if (policy_file) cfg.default_policy = policy_from_flags(policy_file, "", "", std::nullopt);

  std::optional<ModelClient> detector;
  if (detector_arg) {
    EndpointConfig ep;
    if (fs::is_regular_file(*detector_arg) && fs::path(*detector_arg).extension() == ".json") {
      ep = endpoint_from_json(read_json(*detector_arg), fs::absolute(*detector_arg).parent_path());
    } else {
      ep.name = "detector";
      ep.base_url = *detector_arg;
      if (detector_model) ep.model = *detector_model;
      ep = endpoint_from_json(endpoint_to_json(ep), fs::current_path());
    }
    if (!is_local_endpoint(ep.base_url)) {
      std::cerr << "warning: detector endpoint " << ep.base_url
                << " is not local; raw screenshots sent to /v1/detect leave this machine\n";
    }
    detector.emplace(ep);
  }

  Gateway gateway(cfg, std::move(detector));
  GatewayServer server(gateway);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << listen << "\n";
    return kDataError;
  }
  std::cerr << "listening on " << host << ":" << bound << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kEmptyPolicyList:
      return kUsageError;
    default:
      return kDataError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guiguard: privacy recognition and protection toolkit for GUI agent screenshots"};
  app.require_subcommand(1);

  RunFlags rec_flags, fid_flags, sweep_flags;
  std::string rec_mode;
  auto* rec = app.add_subcommand("eval-recognition", "score a recognition endpoint against the dataset");
  add_run_flags(rec, rec_flags);
  rec->add_option("--mode", rec_mode, "joint or decomposed (overrides config)");

  auto* fid = app.add_subcommand("eval-fidelity", "planner replay and judge-based fidelity table");
  add_run_flags(fid, fid_flags);

  std::string sweep_op = "black_mask";
  bool sweep_images = false;
  auto* sweep = app.add_subcommand("graded-sweep", "apply the graded policies and tabulate masked proportions");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--operator", sweep_op, "operator for the default four graded policies");
  sweep->add_flag("--write-images", sweep_images, "also write protected screenshots");

  std::string prot_in, prot_scope, prot_op, prot_out = "protected";
  std::optional<std::string> prot_elements, prot_policy_file;
  std::optional<std::uint64_t> prot_seed;
  auto* prot = app.add_subcommand("protect", "protect one image or a directory of screenshots");
  prot->add_option("--in", prot_in, "image file or directory")->required();
  prot->add_option("--elements", prot_elements, "elements JSON");
  prot->add_option("--policy", prot_scope, "high_only | medium_and_high | full_risk | full_risk_except_necessary");
  prot->add_option("--operator", prot_op, "black_mask | mosaic | random_blocks | text_replace");
  prot->add_option("--policy-file", prot_policy_file, "policy JSON; --policy/--operator/--seed override it");
  prot->add_option("--seed", prot_seed, "seed for random_blocks");
  prot->add_option("--out", prot_out, "output directory");

  std::string serve_listen = "127.0.0.1:8080", serve_mode = "joint";
  std::optional<std::string> serve_detector, serve_model, serve_policy, serve_token;
  int serve_ttl = 3600;
  auto* serve = app.add_subcommand("serve", "run the local sanitization gateway");
  serve->add_option("--listen", serve_listen, "host:port");
  serve->add_option("--detector-endpoint", serve_detector, "detector base URL, script:<file>, or endpoint JSON");
  serve->add_option("--detector-model", serve_model, "model name for a URL detector endpoint");
  serve->add_option("--detect-mode", serve_mode, "joint or decomposed");
  serve->add_option("--policy-file", serve_policy, "default policy JSON");
  serve->add_option("--session-ttl", serve_ttl, "idle session lifetime in seconds")->check(CLI::PositiveNumber);
  serve->add_option("--token", serve_token, "require this bearer token");

  std::string report_in;
  auto* rep = app.add_subcommand("report", "re-render text tables from report JSON files");
  rep->add_option("--in", report_in, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return kUsageError;
  }

  try {
    if (rec->parsed()) {
      RunConfig c = load_config(rec_flags);
      if (!rec_mode.empty()) {
        auto m = parse_strategy(rec_mode);
        if (!m) throw UsageError("--mode must be joint or decomposed");
        c.recognition_mode = *m;
      }
      finish(report::recognition_to_json(run_recognition_eval(c), c), c);
    } else if (fid->parsed()) {
      const RunConfig c = load_config(fid_flags);
      finish(report::fidelity_to_json(run_fidelity_eval(c), c), c);
    } else if (sweep->parsed()) {
      RunConfig c = load_config(sweep_flags);
      if (sweep_images) c.write_images = true;
      if (c.policies.empty()) {
        auto op = parse_operator(sweep_op);
        if (!op) {
          std::vector<std::string_view> names;
          for (auto v : kAllOperators) names.push_back(operator_name(v));
          throw UsageError("unknown operator '" + sweep_op + "'; valid operators: " + join_names(names));
        }
        c.policies = graded_policies(*op, c.seed);
      }
      finish(report::sweep_to_json(run_graded_sweep(c), c), c);
    } else if (prot->parsed()) {
      const auto policy = policy_from_flags(prot_policy_file, prot_scope, prot_op, prot_seed);
      return run_protect(prot_in, prot_elements, policy, prot_out);
    } else if (serve->parsed()) {
      return run_serve(serve_listen, serve_detector, serve_model, serve_policy, serve_ttl, serve_token, serve_mode);
    } else if (rep->parsed()) {
      for (const auto& f : report::rerender(report_in)) {
        std::ifstream in(f);
        std::cout << in.rdbuf();
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    if (e.code() == ErrorCode::kConfigError) {
      for (auto* sub : app.get_subcommands()) std::cerr << "\n" << sub->help();
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
