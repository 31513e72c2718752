#include "laker/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include "laker/csv.hpp"
#include "laker/rng.hpp"

namespace laker {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

// Strict readers: integers must be JSON integers, reals any JSON number.
double read_real(const json& v, const std::string& key) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

long long read_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) config_error("'" + key + "' must be an integer");
  return v.get<long long>();
}

std::uint64_t read_uint(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  config_error("'" + key + "' must be a non-negative integer");
}

bool read_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) config_error("'" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) config_error("'" + key + "' must be a string");
  return v.get<std::string>();
}

using FieldSetter = std::function<void(const json&, const std::string&)>;

void read_object(const json& j, const std::string& where, const std::map<std::string, FieldSetter>& fields) {
  if (!j.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    const std::string path = where.empty() ? key : where + "." + key;
    if (it == fields.end()) config_error("unknown key '" + path + "'");
    it->second(value, path);
  }
}

unsigned threads_from_env() {
  if (const char* env = std::getenv("LAKER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> gap_history(const std::vector<double>& objective, double ref) {
  std::vector<double> out;
  out.reserve(objective.size());
  for (double r : objective) out.push_back(ref != 0.0 ? std::abs(r - ref) / std::abs(ref) : std::nan(""));
  return out;
}

std::string history_name(Index n, const std::string& method, std::uint64_t seed) {
  return "history_" + std::to_string(n) + "_" + method + "_" + std::to_string(seed) + ".csv";
}

// kappa(D^{1/2} A D^{1/2}) for a positive diagonal preconditioner d.
double diagonal_precond_kappa(const Vector& d, const Matrix& A) {
  const Vector s = d.cwiseSqrt();
  const Matrix scaled = s.asDiagonal() * A * s.asDiagonal();
  return condition_number_from(sym_eigenvalues(scaled));
}

struct GroupTask {
  Index n;
  std::uint64_t seed;
};

std::vector<ResultRow> run_group(const ExperimentConfig& cfg, const GroupTask& task) {
  std::vector<ResultRow> rows;
  for (const auto& m : cfg.methods) {
    ResultRow row;
    row.n = task.n;
    row.method = m;
    row.seed = task.seed;
    rows.push_back(std::move(row));
  }
  auto fail = [](ResultRow& row, const std::exception& e) {
    row.metrics = {};
    row.error = e.what();
  };

  RadioFieldModel field;
  MeasurementSet meas;
  RadioMap truth;
  try {
    field = generate_field(cfg.field, field_seed(task.seed));
    meas = sample_measurements(field, task.n, cfg.noise_std, measurement_seed(task.seed, task.n));
    truth = truth_map(field, cfg.grid);
  } catch (const std::exception& e) {
    for (auto& row : rows) fail(row, e);
    return rows;
  }

  const bool needs_kernel = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                        [](const std::string& m) { return m != "gprt"; });
  std::optional<EmbeddingMatrix> E;
  std::optional<AttentionKernelSystem> sys;
  Matrix A;
  Vector alpha_ref;
  double ref_obj = 0.0;
  double ref_time = 0.0;
  std::optional<double> kappa_raw;
  std::optional<std::string> shared_error;
  if (needs_kernel) {
    try {
      E = embed_positions(meas.positions, cfg.embedding);
      sys.emplace(attention_kernel(*E), cfg.lambda);
      A = sys->regularized();
      const auto start = Clock::now();
      alpha_ref = reference_solve(*sys, meas.values);
      ref_time = seconds_since(start);
      ref_obj = objective(*sys, alpha_ref, meas.values);
      if (cfg.compute_kappa) kappa_raw = condition_number_spd(A);
    } catch (const std::exception& e) {
      shared_error = e.what();
    }
  }

  SolverConfig scfg;
  scfg.pcg_tol = cfg.pcg_tol;
  scfg.target_tol = cfg.target_tol;
  scfg.gd_budget = cfg.gd_budget;
  const Vector& y = meas.values;

  for (auto& row : rows) {
    if (row.method != "gprt" && shared_error) {
      row.error = *shared_error;
      continue;
    }
    try {
      std::optional<SolveResult> solve;
      MetricsRecord rec;
      if (row.method == "gprt") {
        const auto start = Clock::now();
        const RadioMap map = gprt_fit_predict(meas.positions, y, cfg.grid, cfg.gprt);
        const double t = seconds_since(start);
        const MapMetrics mm = map_metrics(map, truth);
        rec.rmse = mm.rmse;
        rec.nmse = mm.nmse;
        rec.solver_time_s = t;
      } else if (row.method == "reference") {
        rec = evaluate(*sys, alpha_ref, alpha_ref, y, reconstruct_map(*E, alpha_ref, cfg.grid), truth);
        rec.solver_time_s = ref_time;
      } else {
        double precond_time = 0.0;
        if (row.method == "laker") {
          CccpConfig ccfg = cfg.cccp;
          ccfg.gamma = cfg.gamma;
          ccfg.seed = method_seed(task.seed, task.n, row.method);
          const auto start = Clock::now();
          auto [P, report] = learn_preconditioner(*sys, ccfg);
          precond_time = seconds_since(start);
          solve = pcg_solve(*sys, y, [&P = P](const Vector& v) { return P.apply(v); }, scfg, ref_obj);
          if (cfg.compute_kappa) rec.kappa_precond = P.condition_number(A);
        } else if (row.method == "jacobi") {
          const auto start = Clock::now();
          Vector d = jacobi_preconditioner(*sys);
          precond_time = seconds_since(start);
          solve = pcg_solve(*sys, y, diagonal_apply(d), scfg, ref_obj);
          if (cfg.compute_kappa) rec.kappa_precond = diagonal_precond_kappa(d, A);
        } else if (row.method == "gd") {
          const auto start = Clock::now();
          scfg.eta = gd_grid_search(*sys, y, default_gd_grid());
          precond_time = seconds_since(start);
          solve = gd_solve(*sys, y, scfg, ref_obj);
          scfg.eta.reset();
        }
        const std::optional<double> kappa_precond = rec.kappa_precond;
        rec = evaluate(*sys, solve->alpha, alpha_ref, y, reconstruct_map(*E, solve->alpha, cfg.grid),
                       truth, &solve->report);
        rec.kappa_precond = kappa_precond;
        rec.precond_time_s = precond_time;
        row.residual_history = solve->report.residual_history;
        row.gap_history = gap_history(solve->report.objective_history, ref_obj);
        if (cfg.write_histories) row.history_path = history_name(row.n, row.method, row.seed);
      }
      if (row.method != "gprt") rec.kappa_raw = kappa_raw;
      row.metrics = rec;
    } catch (const std::exception& e) {
      fail(row, e);
      row.residual_history.clear();
      row.gap_history.clear();
      row.history_path.clear();
    }
  }
  return rows;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

json optional_json(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (sizes.empty()) config_error("sizes must be nonempty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) config_error("sizes must be >= 1");
    if (i > 0 && sizes[i] <= sizes[i - 1]) config_error("sizes must be strictly ascending");
  }
  if (seeds.empty()) config_error("seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    config_error("seeds must be distinct");
  }
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end()) {
      config_error("unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) config_error("method '" + m + "' listed twice");
  }
  if (!(lambda > 0.0)) config_error("lambda must be > 0");
  if (!(gamma >= 0.0)) config_error("gamma must be >= 0");
  if (!(noise_std >= 0.0)) config_error("noise_std must be >= 0");
  if (grid.rows < 1 || grid.cols < 1) config_error("grid rows and cols must be >= 1");
  SolverConfig s;
  s.pcg_tol = pcg_tol;
  s.target_tol = target_tol;
  s.gd_budget = gd_budget;
  s.validate();
  embedding.validate();
  field.validate();
  gprt.validate();
  CccpConfig c = cccp;
  c.gamma = gamma;
  c.validate();
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  std::map<std::string, FieldSetter> embedding_fields = {
      {"dim", [&](const json& v, const std::string& k) { cfg.embedding.dim = static_cast<int>(read_int(v, k)); }},
      {"seed", [&](const json& v, const std::string& k) { cfg.embedding.seed = read_uint(v, k); }},
      {"length_scale", [&](const json& v, const std::string& k) { cfg.embedding.length_scale = read_real(v, k); }},
      {"target_mean_affinity",
       [&](const json& v, const std::string& k) { cfg.embedding.target_mean_affinity = read_real(v, k); }},
  };
  std::map<std::string, FieldSetter> field_fields = {
      {"num_transmitters",
       [&](const json& v, const std::string& k) { cfg.field.num_transmitters = static_cast<int>(read_int(v, k)); }},
      {"power_min_dbm", [&](const json& v, const std::string& k) { cfg.field.power_min_dbm = read_real(v, k); }},
      {"power_range_db", [&](const json& v, const std::string& k) { cfg.field.power_range_db = read_real(v, k); }},
      {"path_loss_exponent",
       [&](const json& v, const std::string& k) { cfg.field.path_loss_exponent = read_real(v, k); }},
      {"shadowing_std_db", [&](const json& v, const std::string& k) { cfg.field.shadowing_std_db = read_real(v, k); }},
      {"shadowing_length_m",
       [&](const json& v, const std::string& k) { cfg.field.shadowing_length_m = read_real(v, k); }},
      {"shadowing_terms",
       [&](const json& v, const std::string& k) { cfg.field.shadowing_terms = static_cast<int>(read_int(v, k)); }},
  };
  std::map<std::string, FieldSetter> gprt_fields = {
      {"rq_alpha", [&](const json& v, const std::string& k) { cfg.gprt.rq_alpha = read_real(v, k); }},
      {"length_scale", [&](const json& v, const std::string& k) { cfg.gprt.length_scale = read_real(v, k); }},
      {"noise_var", [&](const json& v, const std::string& k) { cfg.gprt.noise_var = read_real(v, k); }},
      {"center_targets", [&](const json& v, const std::string& k) { cfg.gprt.center_targets = read_bool(v, k); }},
  };
  std::map<std::string, FieldSetter> cccp_fields = {
      {"epsilon", [&](const json& v, const std::string& k) { cfg.cccp.epsilon = read_real(v, k); }},
      {"rho_floor", [&](const json& v, const std::string& k) { cfg.cccp.rho_floor = read_real(v, k); }},
      {"max_iters", [&](const json& v, const std::string& k) { cfg.cccp.max_iters = static_cast<int>(read_int(v, k)); }},
      {"fp_tol", [&](const json& v, const std::string& k) { cfg.cccp.fp_tol = read_real(v, k); }},
      {"num_directions", [&](const json& v, const std::string& k) {
         if (v.is_null()) {
           cfg.cccp.num_directions.reset();
         } else {
           cfg.cccp.num_directions = static_cast<Index>(read_int(v, k));
         }
       }},
  };
  std::map<std::string, FieldSetter> grid_fields = {
      {"rows", [&](const json& v, const std::string& k) { cfg.grid.rows = static_cast<int>(read_int(v, k)); }},
      {"cols", [&](const json& v, const std::string& k) { cfg.grid.cols = static_cast<int>(read_int(v, k)); }},
  };

  std::map<std::string, FieldSetter> top = {
      {"sizes", [&](const json& v, const std::string& k) {
         if (!v.is_array()) config_error("'" + k + "' must be an array");
         cfg.sizes.clear();
         for (const auto& e : v) cfg.sizes.push_back(static_cast<Index>(read_int(e, k)));
       }},
      {"seeds", [&](const json& v, const std::string& k) {
         if (!v.is_array()) config_error("'" + k + "' must be an array");
         cfg.seeds.clear();
         for (const auto& e : v) cfg.seeds.push_back(read_uint(e, k));
       }},
      {"methods", [&](const json& v, const std::string& k) {
         if (!v.is_array()) config_error("'" + k + "' must be an array");
         cfg.methods.clear();
         for (const auto& e : v) cfg.methods.push_back(read_string(e, k));
       }},
      {"lambda", [&](const json& v, const std::string& k) { cfg.lambda = read_real(v, k); }},
      {"gamma", [&](const json& v, const std::string& k) { cfg.gamma = read_real(v, k); }},
      {"output_dir", [&](const json& v, const std::string& k) { cfg.output_dir = read_string(v, k); }},
      {"pcg_tol", [&](const json& v, const std::string& k) { cfg.pcg_tol = read_real(v, k); }},
      {"target_tol", [&](const json& v, const std::string& k) { cfg.target_tol = read_real(v, k); }},
      {"gd_budget", [&](const json& v, const std::string& k) { cfg.gd_budget = static_cast<int>(read_int(v, k)); }},
      {"noise_std", [&](const json& v, const std::string& k) { cfg.noise_std = read_real(v, k); }},
      {"compute_kappa", [&](const json& v, const std::string& k) { cfg.compute_kappa = read_bool(v, k); }},
      {"write_histories", [&](const json& v, const std::string& k) { cfg.write_histories = read_bool(v, k); }},
      {"embedding", [&](const json& v, const std::string& k) { read_object(v, k, embedding_fields); }},
      {"field", [&](const json& v, const std::string& k) { read_object(v, k, field_fields); }},
      {"gprt", [&](const json& v, const std::string& k) { read_object(v, k, gprt_fields); }},
      {"cccp", [&](const json& v, const std::string& k) { read_object(v, k, cccp_fields); }},
      {"grid", [&](const json& v, const std::string& k) { read_object(v, k, grid_fields); }},
  };
  read_object(j, "", top);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["sizes"] = cfg.sizes;
  j["lambda"] = cfg.lambda;
  j["gamma"] = cfg.gamma;
  j["seeds"] = cfg.seeds;
  j["methods"] = cfg.methods;
  j["output_dir"] = cfg.output_dir;
  j["pcg_tol"] = cfg.pcg_tol;
  j["target_tol"] = cfg.target_tol;
  j["gd_budget"] = cfg.gd_budget;
  j["noise_std"] = cfg.noise_std;
  j["compute_kappa"] = cfg.compute_kappa;
  j["write_histories"] = cfg.write_histories;
  j["embedding"] = {{"dim", cfg.embedding.dim},
                    {"seed", cfg.embedding.seed},
                    {"length_scale", cfg.embedding.length_scale},
                    {"target_mean_affinity", cfg.embedding.target_mean_affinity}};
  j["field"] = {{"num_transmitters", cfg.field.num_transmitters},
                {"power_min_dbm", cfg.field.power_min_dbm},
                {"power_range_db", cfg.field.power_range_db},
                {"path_loss_exponent", cfg.field.path_loss_exponent},
                {"shadowing_std_db", cfg.field.shadowing_std_db},
                {"shadowing_length_m", cfg.field.shadowing_length_m},
                {"shadowing_terms", cfg.field.shadowing_terms}};
  j["gprt"] = {{"rq_alpha", cfg.gprt.rq_alpha},
               {"length_scale", cfg.gprt.length_scale},
               {"noise_var", cfg.gprt.noise_var},
               {"center_targets", cfg.gprt.center_targets}};
  j["cccp"] = {{"epsilon", cfg.cccp.epsilon},
               {"rho_floor", cfg.cccp.rho_floor},
               {"max_iters", cfg.cccp.max_iters},
               {"fp_tol", cfg.cccp.fp_tol},
               {"num_directions", cfg.cccp.num_directions ? json(*cfg.cccp.num_directions) : json(nullptr)}};
  j["grid"] = {{"rows", cfg.grid.rows}, {"cols", cfg.grid.cols}};
  return j;
}

std::uint64_t field_seed(std::uint64_t seed) { return hash_combine(seed, hash_label("field")); }

std::uint64_t measurement_seed(std::uint64_t seed, Index n) {
  return hash_combine(hash_combine(seed, static_cast<std::uint64_t>(n)), hash_label("measurements"));
}

std::uint64_t method_seed(std::uint64_t seed, Index n, std::string_view method) {
  return hash_combine(hash_combine(seed, static_cast<std::uint64_t>(n)), hash_label(method));
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, std::optional<unsigned> threads) {
  cfg.validate();
  std::vector<GroupTask> tasks;
  for (Index n : cfg.sizes) {
    for (std::uint64_t s : cfg.seeds) tasks.push_back({n, s});
  }
  // Largest groups first so workers finish together.
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;

  std::vector<std::vector<ResultRow>> results(tasks.size());
  const unsigned workers =
      std::min<unsigned>(threads.value_or(threads_from_env()), static_cast<unsigned>(tasks.size()));
  if (workers <= 1) {
    for (std::size_t i : order) results[i] = run_group(cfg, tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < order.size(); k = next++) {
          results[order[k]] = run_group(cfg, tasks[order[k]]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ResultRow> rows;
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      for (std::size_t ki = 0; ki < cfg.seeds.size(); ++ki) {
        rows.push_back(std::move(results[si * cfg.seeds.size() + ki][mi]));
      }
    }
  }
  return rows;
}

std::optional<double> median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

json summarize(const std::vector<ResultRow>& rows) {
  using Getter = std::function<std::optional<double>(const MetricsRecord&)>;
  auto as_double = [](const std::optional<int>& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  };
  const std::vector<std::pair<std::string, Getter>> columns = {
      {"obj_gap", [](const MetricsRecord& m) { return m.obj_gap; }},
      {"residual", [](const MetricsRecord& m) { return m.residual; }},
      {"pred_disc", [](const MetricsRecord& m) { return m.pred_disc; }},
      {"solver_time_s", [](const MetricsRecord& m) { return m.solver_time_s; }},
      {"precond_time_s", [](const MetricsRecord& m) { return m.precond_time_s; }},
      {"kappa_raw", [](const MetricsRecord& m) { return m.kappa_raw; }},
      {"kappa_precond", [](const MetricsRecord& m) { return m.kappa_precond; }},
      {"iters_to_target", [&](const MetricsRecord& m) { return as_double(m.iters_to_target); }},
      {"rmse", [](const MetricsRecord& m) { return m.rmse; }},
      {"nmse", [](const MetricsRecord& m) { return m.nmse; }},
  };

  // Cells in first-seen order.
  std::vector<std::pair<Index, std::string>> keys;
  std::map<std::pair<Index, std::string>, std::vector<const ResultRow*>> cells;
  json failures = json::array();
  for (const auto& row : rows) {
    const auto key = std::make_pair(row.n, row.method);
    if (!cells.count(key)) keys.push_back(key);
    cells[key].push_back(&row);
    if (row.failed()) {
      failures.push_back({{"n", row.n}, {"method", row.method}, {"seed", row.seed}, {"error", *row.error}});
    }
  }

  json out_cells = json::array();
  for (const auto& key : keys) {
    const auto& members = cells[key];
    json cell;
    cell["n"] = key.first;
    cell["method"] = key.second;
    cell["seeds"] = members.size();
    std::size_t failed = 0;
    for (const auto* r : members) failed += r->failed() ? 1 : 0;
    cell["failed"] = failed;
    json medians = json::object();
    for (const auto& [name, get] : columns) {
      std::vector<double> values;
      for (const auto* r : members) {
        if (const auto v = get(r->metrics)) values.push_back(*v);
      }
      medians[name] = optional_json(median(values));
    }
    cell["median"] = medians;
    out_cells.push_back(cell);
  }
  return {{"cells", out_cells}, {"failures", failures}};
}

void emit_tables(const std::vector<ResultRow>& rows, const std::filesystem::path& output_dir) {
  if (rows.empty()) throw Error(ErrorCode::EmptyRows, "no result rows to write");
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + output_dir.string() + ": " + ec.message());

  const auto numerical_path = output_dir / "numerical.csv";
  auto numerical = open_output(numerical_path);
  write_csv_header(numerical, {"n", "method", "seed", "obj_gap", "residual", "pred_disc", "solver_time_s",
                               "precond_time_s", "kappa_raw", "kappa_precond", "iters_to_target"});
  const auto recon_path = output_dir / "reconstruction.csv";
  auto recon = open_output(recon_path);
  write_csv_header(recon, {"n", "method", "seed", "rmse", "nmse"});

  for (const auto& row : rows) {
    const MetricsRecord& m = row.metrics;
    const auto n = static_cast<long long>(row.n);
    const auto seed = std::to_string(row.seed);
    CsvRow()
        .add(n)
        .add(row.method)
        .add(seed)
        .add(m.obj_gap)
        .add(m.residual)
        .add(m.pred_disc)
        .add(m.solver_time_s)
        .add(m.precond_time_s)
        .add(m.kappa_raw)
        .add(m.kappa_precond)
        .add(m.iters_to_target)
        .write(numerical);
    CsvRow().add(n).add(row.method).add(seed).add(m.rmse).add(m.nmse).write(recon);

    if (!row.history_path.empty()) {
      const auto path = output_dir / row.history_path;
      auto hist = open_output(path);
      write_csv_header(hist, {"iteration", "residual", "obj_gap"});
      for (std::size_t k = 0; k < row.residual_history.size(); ++k) {
        CsvRow r;
        r.add(static_cast<long long>(k)).add(row.residual_history[k]);
        if (k < row.gap_history.size() && std::isfinite(row.gap_history[k])) {
          r.add(row.gap_history[k]);
        } else {
          r.add(std::string_view{});
        }
        r.write(hist);
      }
      finish_output(hist, path);
    }
  }
  finish_output(numerical, numerical_path);
  finish_output(recon, recon_path);

  const auto summary_path = output_dir / "summary.json";
  auto summary = open_output(summary_path);
  summary << summarize(rows).dump(2) << '\n';
  finish_output(summary, summary_path);
}

}  // namespace laker
