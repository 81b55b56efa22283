// Copyright 2026 The VerFedSV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "verfed/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace verfed {

namespace fs = std::filesystem;

namespace {

// Seed-derivation tags; every stream in a run hangs off the manifest seed.
enum : uint64_t {
  kTagSynthData = 2,
  kTagSubsample = 3,
  kTagSplit = 4,
  kTagTrainer = 5,
  kTagValuation = 6,
  kTagCompletion = 7,
  kTagCloneBase = 1000,
  kTagRandomBase = 2000,
  kTagAsyncClientBase = 100,
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

SyntheticClientSpec parse_spec(SyntheticClientSpec::Kind kind, const std::string& value) {
  SyntheticClientSpec spec;
  spec.kind = kind;
  for (const std::string& tok : split_ws(value)) {
    const size_t eq = tok.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("synthetic client spec expects key=value tokens, got '" +
                        tok + "'");
    }
    const std::string k = tok.substr(0, eq);
    const std::string v = tok.substr(eq + 1);
    if (k == "base") spec.base_client = std::stoi(v);
    else if (k == "fraction") spec.fraction = std::stod(v);
    else if (k == "std") { spec.noise_std = std::stod(v); spec.stddev = std::stod(v); }
    else if (k == "mean") spec.mean = std::stod(v);
    else if (k == "period") spec.period = std::stod(v);
    else if (k == "kind") spec.kind_label = v;
    else throw ConfigError("unknown synthetic client key '" + k + "'");
  }
  return spec;
}

std::string default_kind_label(const SyntheticClientSpec& spec) {
  if (!spec.kind_label.empty()) return spec.kind_label;
  if (spec.kind == SyntheticClientSpec::Kind::kRandom) return "random";
  const int pct = static_cast<int>(std::lround(spec.fraction * 100.0));
  return "clone(" + std::to_string(pct) + "%)";
}

std::vector<int> near_equal_splits(int d, int clients) {
  if (clients < 1 || clients > d) {
    throw ConfigError("cannot split " + std::to_string(d) + " features across " +
                      std::to_string(clients) + " clients");
  }
  std::vector<int> splits(clients, d / clients);
  for (int i = 0; i < d % clients; ++i) ++splits[i];
  return splits;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  try {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "expected_dim") cfg.expected_dim = std::stoi(value);
    else if (key == "synth_samples") cfg.synth_samples = std::stoi(value);
    else if (key == "synth_dim") cfg.synth_dim = std::stoi(value);
    else if (key == "synth_classes") cfg.synth_classes = std::stoi(value);
    else if (key == "synth_label_flip") cfg.synth_label_flip = std::stod(value);
    else if (key == "subsample") cfg.subsample = std::stoi(value);
    else if (key == "test_fraction") cfg.test_fraction = std::stod(value);
    else if (key == "normalize") cfg.normalize = parse_bool(value);
    else if (key == "splits") {
      cfg.splits.clear();
      std::istringstream in(value);
      std::string tok;
      while (std::getline(in, tok, ',')) cfg.splits.push_back(std::stoi(tok));
    } else if (key == "clients") cfg.default_clients = std::stoi(value);
    else if (key == "column_shuffle_seed") cfg.column_shuffle_seed = std::stoull(value);
    else if (key == "mode") cfg.mode = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "rounds") cfg.rounds = std::stoi(value);
    else if (key == "batch_size") cfg.batch_size = std::stoi(value);
    else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
    else if (key == "lr_schedule") cfg.lr_schedule = value;
    else if (key == "l2") cfg.l2 = std::stod(value);
    else if (key == "full_eval_every") cfg.full_eval_every = std::stoi(value);
    else if (key == "total_time") cfg.total_time = std::stod(value);
    else if (key == "valuation_interval") cfg.valuation_interval = std::stod(value);
    else if (key == "client_period") cfg.client_period = std::stod(value);
    else if (key == "client_tau") cfg.client_tau = std::stoi(value);
    else if (key == "async_learning_rate") cfg.async_learning_rate = std::stod(value);
    else if (key == "participation_prob") cfg.participation_prob = std::stod(value);
    else if (key == "valuation") cfg.valuation = value;
    else if (key == "mc_permutations") cfg.mc_permutations = std::stoll(value);
    else if (key == "antithetic") cfg.antithetic = parse_bool(value);
    else if (key == "completion_rank") cfg.completion_rank = std::stoi(value);
    else if (key == "completion_lambda") cfg.completion_lambda = std::stod(value);
    else if (key == "completion_iters") cfg.completion_iters = std::stoi(value);
    else if (key == "completion_tol") cfg.completion_tol = std::stod(value);
    else if (key == "clone_noise_std") cfg.clone_noise_std = std::stod(value);
    else if (key == "output") cfg.output = value;
    else if (key == "clone") {
      cfg.extra_clients.push_back(parse_spec(SyntheticClientSpec::Kind::kClone, value));
    } else if (key == "random") {
      cfg.extra_clients.push_back(parse_spec(SyntheticClientSpec::Kind::kRandom, value));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
  }
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  ExperimentConfig cfg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (split_ws(line).empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto begin = s.find_first_not_of(" \t");
      const auto end = s.find_last_not_of(" \t");
      return begin == std::string::npos ? std::string{} : s.substr(begin, end - begin + 1);
    };
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.mode != "sync" && cfg.mode != "async") {
    throw ConfigError("mode must be sync or async, got '" + cfg.mode + "'");
  }
  if (cfg.valuation != "exact" && cfg.valuation != "mc") {
    throw ConfigError("valuation must be exact or mc, got '" + cfg.valuation + "'");
  }
  if (cfg.lr_schedule != "constant" && cfg.lr_schedule != "one_over_t") {
    throw ConfigError("lr_schedule must be constant or one_over_t");
  }
  if (cfg.dataset != "synthetic" && !fs::exists(cfg.dataset)) {
    throw ConfigError("dataset file does not exist: " + cfg.dataset);
  }
  if (cfg.test_fraction < 0.0 || cfg.test_fraction >= 1.0) {
    throw ConfigError("test_fraction must be in [0, 1)");
  }
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  validate(cfg);
  DenseDataset dense =
      cfg.dataset == "synthetic"
          ? make_synthetic_classification(cfg.synth_samples, cfg.synth_dim,
                                          cfg.synth_classes,
                                          derive_seed(cfg.seed, kTagSynthData),
                                          cfg.synth_label_flip)
          : load_libsvm(cfg.dataset, cfg.expected_dim);
  if (cfg.subsample > 0) {
    dense = subsample_rows(dense, cfg.subsample, derive_seed(cfg.seed, kTagSubsample));
  }

  const std::vector<int> splits =
      cfg.splits.empty()
          ? near_equal_splits(static_cast<int>(dense.dim()), cfg.default_clients)
          : cfg.splits;
  VerticalDataset vd = partition_vertical(dense, splits, cfg.column_shuffle_seed);

  PreparedData pd;
  const int regulars = vd.num_clients();
  for (int m = 0; m < regulars; ++m) {
    ClientInfo info;
    info.client_id = m;
    info.kind = "regular";
    info.dim = static_cast<int>(vd.clients[m].dim());
    info.period = cfg.client_period;
    pd.clients.push_back(info);
  }

  for (size_t i = 0; i < cfg.extra_clients.size(); ++i) {
    const SyntheticClientSpec& spec = cfg.extra_clients[i];
    ClientData cd;
    if (spec.kind == SyntheticClientSpec::Kind::kClone) {
      if (spec.base_client < 0 || spec.base_client >= regulars) {
        throw ConfigError("clone base client out of range");
      }
      cd = make_noisy_clone(vd.clients[spec.base_client], spec.fraction,
                            spec.noise_std,
                            derive_seed(cfg.seed, kTagCloneBase + i));
    } else {
      cd = make_random_client(static_cast<int>(vd.num_samples()),
                              static_cast<int>(vd.clients[0].dim()), spec.mean,
                              spec.stddev, derive_seed(cfg.seed, kTagRandomBase + i));
    }
    cd.client_id = vd.num_clients();
    ClientInfo info;
    info.client_id = cd.client_id;
    info.kind = default_kind_label(spec);
    info.dim = static_cast<int>(cd.dim());
    info.period = spec.period > 0.0 ? spec.period : cfg.client_period;
    vd.clients.push_back(std::move(cd));
    pd.clients.push_back(info);
  }

  if (cfg.normalize) {
    for (auto& client : vd.clients) {
      client = normalize_client_features(client).data;
    }
  }

  // Row split shared by every client so sample IDs stay aligned.
  const int n = static_cast<int>(vd.num_samples());
  const int n_test = static_cast<int>(std::floor(cfg.test_fraction * n));
  Rng rng(derive_seed(cfg.seed, kTagSplit));
  std::vector<int> test_ids = rng.sample_without_replacement(n, n_test);
  std::vector<char> in_test(n, 0);
  for (int id : test_ids) in_test[id] = 1;

  auto take_rows = [&](bool test_part) {
    VerticalDataset part;
    part.n_classes = vd.n_classes;
    const int rows = test_part ? n_test : n - n_test;
    for (const auto& client : vd.clients) {
      ClientData cd;
      cd.client_id = client.client_id;
      cd.features.resize(rows, client.dim());
      int r = 0;
      for (int i = 0; i < n; ++i) {
        if (static_cast<bool>(in_test[i]) != test_part) continue;
        cd.features.row(r++) = client.features.row(i);
      }
      part.clients.push_back(std::move(cd));
    }
    part.labels.reserve(rows);
    for (int i = 0; i < n; ++i) {
      if (static_cast<bool>(in_test[i]) == test_part) part.labels.push_back(vd.labels[i]);
    }
    return part;
  };
  pd.train = take_rows(false);
  pd.test = take_rows(true);

  const int tau = std::min<int>(cfg.client_tau, static_cast<int>(pd.train.num_samples()));
  for (auto& info : pd.clients) info.tau = tau;
  return pd;
}

namespace {

SyncConfig make_sync_config(const ExperimentConfig& cfg, int n_train) {
  SyncConfig sc;
  sc.rounds = cfg.rounds;
  sc.batch_size = cfg.batch_size == 0 ? 0 : std::min(cfg.batch_size, n_train);
  sc.learning_rate = cfg.learning_rate;
  sc.schedule = cfg.lr_schedule == "one_over_t" ? LrSchedule::kOneOverT
                                                : LrSchedule::kConstant;
  sc.l2 = cfg.l2;
  sc.seed = derive_seed(cfg.seed, kTagTrainer);
  sc.full_eval_every = cfg.full_eval_every;
  return sc;
}

AsyncConfig make_async_config(const ExperimentConfig& cfg, const PreparedData& pd) {
  AsyncConfig ac;
  ac.total_time = cfg.total_time;
  ac.valuation_interval = cfg.valuation_interval;
  ac.l2 = cfg.l2;
  for (size_t m = 0; m < pd.clients.size(); ++m) {
    ClientProfile prof;
    prof.client_id = static_cast<int>(m);
    prof.tau = pd.clients[m].tau;
    prof.period = pd.clients[m].period;
    prof.learning_rate = cfg.async_learning_rate;
    prof.seed = derive_seed(cfg.seed, kTagAsyncClientBase + m);
    prof.participation_prob = cfg.participation_prob;
    ac.profiles.push_back(prof);
  }
  return ac;
}

ValuationResult run_valuation(const UtilityEvaluator& eval,
                              const ExperimentConfig& cfg) {
  if (cfg.valuation == "exact") return exact_verfedsv(eval);
  McOptions mo;
  mo.permutations = cfg.mc_permutations;
  mo.seed = derive_seed(cfg.seed, kTagValuation);
  mo.antithetic = cfg.antithetic;
  return mc_verfedsv(eval, mo);
}

std::vector<ReportRow> make_rows(const ValuationResult& val,
                                 const std::vector<ClientInfo>& clients,
                                 const std::optional<ErrorBudget>& budget) {
  const double sum = std::accumulate(val.values.begin(), val.values.end(), 0.0);
  double bound = budget ? budget->bound : 0.0;
  if (val.mc_epsilon) bound += *val.mc_epsilon;
  std::vector<ReportRow> rows;
  for (size_t m = 0; m < val.values.size(); ++m) {
    ReportRow row;
    row.client_id = static_cast<int>(m);
    row.kind = m < clients.size() ? clients[m].kind : "regular";
    row.value = val.values[m];
    row.share_pct = sum == 0.0 ? 0.0 : 100.0 * val.values[m] / sum;
    row.method = val.method;
    row.K = val.permutations;
    row.seed = val.seed;
    row.error_bound = bound;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PipelineOutcome {
  PreparedData data;
  ValuationResult valuation;
  std::optional<ErrorBudget> budget;
  std::vector<ReportRow> rows;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  EmbeddingTrace trace;  // sync runs keep the trace for diagnostics
};

PipelineOutcome run_sync_pipeline(const ExperimentConfig& cfg, bool value) {
  PipelineOutcome out;
  out.data = prepare_data(cfg);
  SyncRunResult run =
      run_fedsgd(out.data.train, make_sync_config(cfg, static_cast<int>(
                                                           out.data.train.num_samples())));
  out.train_accuracy = accuracy(run.models, out.data.train);
  out.test_accuracy =
      out.data.test.num_samples() > 0 ? accuracy(run.models, out.data.test) : 0.0;
  if (value) {
    CompletionConfig cc;
    cc.rank = cfg.completion_rank;
    cc.lambda = cfg.completion_lambda;
    cc.max_iters = cfg.completion_iters;
    cc.tol = cfg.completion_tol;
    cc.seed = derive_seed(cfg.seed, kTagCompletion);
    const CompletedEmbeddings completed = complete_trace(run.trace, cc);
    out.budget = completion_error_budget(
        completed, lipschitz_G(run.trace.n_channels));
    UtilityEvaluator eval(SnapshotSeries::from_completed(run.trace, completed),
                          out.data.train.labels);
    out.valuation = run_valuation(eval, cfg);
    out.rows = make_rows(out.valuation, out.data.clients, out.budget);
  }
  out.trace = std::move(run.trace);
  return out;
}

PipelineOutcome run_async_pipeline(const ExperimentConfig& cfg) {
  PipelineOutcome out;
  out.data = prepare_data(cfg);
  AsyncRunResult run = run_vafl(out.data.train, make_async_config(cfg, out.data));
  out.train_accuracy = accuracy(run.models, out.data.train);
  out.test_accuracy =
      out.data.test.num_samples() > 0 ? accuracy(run.models, out.data.test) : 0.0;
  UtilityEvaluator eval(SnapshotSeries::from_async(std::move(run.snapshots)),
                        out.data.train.labels);
  out.valuation = run_valuation(eval, cfg);
  out.rows = make_rows(out.valuation, out.data.clients, std::nullopt);
  return out;
}

std::string summary_text(const std::string& command, const ExperimentConfig& cfg,
                         const PipelineOutcome& out, int rounds) {
  std::string s;
  s += "command: " + command + "\n";
  s += "mode: " + cfg.mode + "\n";
  s += "clients: " + std::to_string(out.data.clients.size()) + "\n";
  s += "train_samples: " + std::to_string(out.data.train.num_samples()) + "\n";
  s += "test_samples: " + std::to_string(out.data.test.num_samples()) + "\n";
  s += "valuation_rounds: " + std::to_string(rounds) + "\n";
  s += "valuation_method: " + out.valuation.method + "\n";
  s += "permutations: " + std::to_string(out.valuation.permutations) + "\n";
  s += "valuation_seed: " + std::to_string(out.valuation.seed) + "\n";
  s += "completion_epsilon: " +
       (out.budget ? format_double(out.budget->epsilon) : std::string("-")) + "\n";
  s += "completion_bound_2G_eps: " +
       (out.budget ? format_double(out.budget->bound) : std::string("-")) + "\n";
  s += "mc_epsilon: " +
       (out.valuation.mc_epsilon ? format_double(*out.valuation.mc_epsilon)
                                 : std::string("-")) + "\n";
  s += "mc_delta: " +
       (out.valuation.mc_delta ? format_double(*out.valuation.mc_delta)
                               : std::string("-")) + "\n";
  s += "train_accuracy: " + format_double(out.train_accuracy) + "\n";
  s += "test_accuracy: " + format_double(out.test_accuracy) + "\n";
  s += "avg_full_utility: " + format_double(out.valuation.avg_full_utility) + "\n";
  return s;
}

}  // namespace

std::string report_rows_csv(const std::vector<ReportRow>& rows) {
  std::string s = "client_id,kind,value,share_pct,method,K,seed,error_bound\n";
  for (const auto& row : rows) {
    s += std::to_string(row.client_id) + ',' + row.kind + ',' +
         format_double(row.value) + ',' + format_double(row.share_pct) + ',' +
         row.method + ',' + std::to_string(row.K) + ',' +
         std::to_string(row.seed) + ',' + format_double(row.error_bound) + '\n';
  }
  return s;
}

std::vector<ReportRow> parse_report_rows(const fs::path& file) {
  std::vector<ReportRow> rows;
  for (const auto& fields : read_csv(file)) {
    if (fields[0] == "client_id") continue;
    if (fields.size() != 8) throw ParseError("valuation CSV row has wrong arity");
    ReportRow row;
    row.client_id = std::stoi(fields[0]);
    row.kind = fields[1];
    row.value = std::strtod(fields[2].c_str(), nullptr);
    row.share_pct = std::strtod(fields[3].c_str(), nullptr);
    row.method = fields[4];
    row.K = std::stoll(fields[5]);
    row.seed = std::strtoull(fields[6].c_str(), nullptr, 10);
    row.error_bound = std::strtod(fields[7].c_str(), nullptr);
    rows.push_back(std::move(row));
  }
  return rows;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg) {
  PreparedData pd = prepare_data(cfg);
  const fs::path dir = cfg.output;
  TrainOutcome out;
  out.dir = dir;

  Checkpoint cp;
  cp.mode = cfg.mode;
  cp.n_classes = pd.train.n_classes;
  cp.seed = cfg.seed;
  cp.labels = pd.train.labels;
  cp.clients = pd.clients;

  if (cfg.mode == "sync") {
    SyncRunResult run = run_fedsgd(
        pd.train, make_sync_config(cfg, static_cast<int>(pd.train.num_samples())));
    for (int t = 1; t <= run.trace.rounds; ++t) {
      cp.loss_history.emplace_back(t, run.batch_loss[t - 1]);
    }
    out.final_loss = run.full_loss.empty()
                         ? (run.batch_loss.empty() ? 0.0 : run.batch_loss.back())
                         : run.full_loss.back().second;
    out.train_accuracy = accuracy(run.models, pd.train);
    out.test_accuracy =
        pd.test.num_samples() > 0 ? accuracy(run.models, pd.test) : 0.0;
    cp.trace = std::move(run.trace);
  } else {
    AsyncRunResult run = run_vafl(pd.train, make_async_config(cfg, pd));
    for (size_t k = 0; k < run.snapshot_loss.size(); ++k) {
      cp.loss_history.emplace_back(static_cast<double>(k) * cfg.valuation_interval,
                                   run.snapshot_loss[k]);
    }
    out.final_loss = run.snapshot_loss.back();
    out.train_accuracy = accuracy(run.models, pd.train);
    out.test_accuracy =
        pd.test.num_samples() > 0 ? accuracy(run.models, pd.test) : 0.0;
    cp.snapshots = std::move(run.snapshots);
    cp.valuation_points = run.valuation_points;
    save_events_csv(dir / "events.csv", run.events);
  }
  save_checkpoint(dir, cp);

  std::string s;
  s += "command: train\n";
  s += "mode: " + cfg.mode + "\n";
  s += "clients: " + std::to_string(pd.clients.size()) + "\n";
  s += "train_samples: " + std::to_string(pd.train.num_samples()) + "\n";
  s += "test_samples: " + std::to_string(pd.test.num_samples()) + "\n";
  s += "rounds: " +
       std::to_string(cfg.mode == "sync" ? cp.trace.rounds : cp.valuation_points) + "\n";
  s += "final_loss: " + format_double(out.final_loss) + "\n";
  s += "train_accuracy: " + format_double(out.train_accuracy) + "\n";
  s += "test_accuracy: " + format_double(out.test_accuracy) + "\n";
  atomic_write_file(dir / "summary_train.txt", s);
  return out;
}

ValueOutcome cmd_value(const fs::path& trace_dir, const ExperimentConfig& cfg) {
  Checkpoint cp = load_checkpoint(trace_dir);
  ValueOutcome out;

  std::optional<ErrorBudget> budget;
  SnapshotSeries series;
  int rounds = 0;
  if (cp.mode == "sync") {
    CompletionConfig cc;
    cc.rank = cfg.completion_rank;
    cc.lambda = cfg.completion_lambda;
    cc.max_iters = cfg.completion_iters;
    cc.tol = cfg.completion_tol;
    cc.seed = derive_seed(cfg.seed, kTagCompletion);
    const CompletedEmbeddings completed = complete_trace(cp.trace, cc);
    budget = completion_error_budget(completed, lipschitz_G(cp.trace.n_channels));
    series = SnapshotSeries::from_completed(cp.trace, completed);
    rounds = cp.trace.rounds;
  } else {
    series = SnapshotSeries::from_async(std::move(cp.snapshots));
    rounds = series.rounds();
  }

  UtilityEvaluator eval(std::move(series), cp.labels);
  out.valuation = run_valuation(eval, cfg);
  out.budget = budget;
  out.rows = make_rows(out.valuation, cp.clients, budget);
  out.csv = trace_dir / "valuation.csv";
  atomic_write_file(out.csv, report_rows_csv(out.rows));

  std::string s;
  s += "command: value\n";
  s += "mode: " + cp.mode + "\n";
  s += "clients: " + std::to_string(out.rows.size()) + "\n";
  s += "samples: " + std::to_string(cp.labels.size()) + "\n";
  s += "valuation_rounds: " + std::to_string(rounds) + "\n";
  s += "valuation_method: " + out.valuation.method + "\n";
  s += "permutations: " + std::to_string(out.valuation.permutations) + "\n";
  s += "valuation_seed: " + std::to_string(out.valuation.seed) + "\n";
  s += "completion_epsilon: " +
       (budget ? format_double(budget->epsilon) : std::string("-")) + "\n";
  s += "completion_bound_2G_eps: " +
       (budget ? format_double(budget->bound) : std::string("-")) + "\n";
  s += "mc_epsilon: " +
       (out.valuation.mc_epsilon ? format_double(*out.valuation.mc_epsilon)
                                 : std::string("-")) + "\n";
  s += "mc_delta: " +
       (out.valuation.mc_delta ? format_double(*out.valuation.mc_delta)
                               : std::string("-")) + "\n";
  s += "avg_full_utility: " + format_double(out.valuation.avg_full_utility) + "\n";
  atomic_write_file(trace_dir / "summary_value.txt", s);
  return out;
}

Preset parse_preset(const std::string& name) {
  if (name == "heterogeneity") return Preset::kHeterogeneity;
  if (name == "random_feature_sync") return Preset::kRandomFeatureSync;
  if (name == "frequency") return Preset::kFrequency;
  if (name == "random_feature_async") return Preset::kRandomFeatureAsync;
  if (name == "rank_report") return Preset::kRankReport;
  throw ConfigError("unknown preset '" + name +
                    "' (expected heterogeneity, random_feature_sync, frequency, "
                    "random_feature_async or rank_report)");
}

std::string preset_name(Preset preset) {
  switch (preset) {
    case Preset::kHeterogeneity: return "heterogeneity";
    case Preset::kRandomFeatureSync: return "random_feature_sync";
    case Preset::kFrequency: return "frequency";
    case Preset::kRandomFeatureAsync: return "random_feature_async";
    case Preset::kRankReport: return "rank_report";
  }
  return "?";
}

ExperimentOutcome cmd_experiment(Preset preset, const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  const fs::path dir = cfg.output;
  ExperimentOutcome out;
  out.dir = dir;

  switch (preset) {
    case Preset::kHeterogeneity: {
      cfg.mode = "sync";
      cfg.extra_clients.clear();
      for (int i = 0; i < 5; ++i) {
        SyntheticClientSpec spec;
        spec.kind = SyntheticClientSpec::Kind::kClone;
        spec.base_client = 0;
        spec.fraction = 0.1 * i;
        spec.noise_std = cfg.clone_noise_std;
        spec.kind_label = "clone(" + std::to_string(10 * i) + "%)";
        cfg.extra_clients.push_back(spec);
      }
      PipelineOutcome pipe = run_sync_pipeline(cfg, true);
      const int regulars =
          static_cast<int>(pipe.data.clients.size()) - 5;
      const double base_value = pipe.valuation.values[0];
      std::string csv = "level_pct,client_id,value,rel_diff\n";
      for (int i = 0; i < 5; ++i) {
        const int id = regulars + i;
        const double v = pipe.valuation.values[id];
        const double denom = std::abs(base_value) > 0.0 ? std::abs(base_value) : 1.0;
        const double diff = std::abs(base_value - v) / denom;
        out.heterogeneity.emplace_back(10.0 * i, id, v, diff);
        csv += format_double(10.0 * i) + ',' + std::to_string(id) + ',' +
               format_double(v) + ',' + format_double(diff) + '\n';
      }
      atomic_write_file(dir / "heterogeneity.csv", csv);
      out.rows = pipe.rows;
      out.train_accuracy = pipe.train_accuracy;
      out.test_accuracy = pipe.test_accuracy;
      atomic_write_file(dir / "valuation.csv", report_rows_csv(pipe.rows));
      atomic_write_file(dir / "summary.txt",
                        summary_text("experiment " + preset_name(preset), cfg, pipe,
                                     cfg.rounds));
      break;
    }
    case Preset::kRandomFeatureSync:
    case Preset::kRandomFeatureAsync: {
      const bool sync = preset == Preset::kRandomFeatureSync;
      cfg.mode = sync ? "sync" : "async";
      cfg.extra_clients.clear();
      for (int i = 1; i <= 5; ++i) {
        SyntheticClientSpec spec;
        spec.kind = SyntheticClientSpec::Kind::kRandom;
        // Synchronous variant uses mean i, std i; the asynchronous one uses
        // standard Gaussian features at varying periods.
        spec.mean = sync ? static_cast<double>(i) : 0.0;
        spec.stddev = sync ? static_cast<double>(i) : 1.0;
        spec.period = sync ? 0.0 : 0.01 * i;
        spec.kind_label = "random";
        cfg.extra_clients.push_back(spec);
      }
      PipelineOutcome pipe =
          sync ? run_sync_pipeline(cfg, true) : run_async_pipeline(cfg);
      double regular_share = 0.0;
      for (const auto& row : pipe.rows) {
        if (row.kind == "regular") regular_share += row.share_pct;
      }
      out.regular_share_pct = regular_share;
      out.rows = pipe.rows;
      out.train_accuracy = pipe.train_accuracy;
      out.test_accuracy = pipe.test_accuracy;
      atomic_write_file(dir / "valuation.csv", report_rows_csv(pipe.rows));
      std::string s = summary_text("experiment " + preset_name(preset), cfg, pipe,
                                   sync ? cfg.rounds
                                        : static_cast<int>(std::lround(
                                              cfg.total_time / cfg.valuation_interval)));
      s += "regular_share_pct: " + format_double(regular_share) + "\n";
      atomic_write_file(dir / "summary.txt", s);
      break;
    }
    case Preset::kFrequency: {
      cfg.mode = "async";
      cfg.extra_clients.clear();
      for (int i = 1; i <= 5; ++i) {
        SyntheticClientSpec spec;
        spec.kind = SyntheticClientSpec::Kind::kClone;
        spec.base_client = 0;
        spec.fraction = 0.0;
        spec.period = 0.01 * i;
        spec.kind_label = "frequency(" + format_double(0.01 * i) + ")";
        cfg.extra_clients.push_back(spec);
      }
      PipelineOutcome pipe = run_async_pipeline(cfg);
      std::string csv = "client_id,period,share_pct\n";
      for (size_t m = 0; m < pipe.rows.size(); ++m) {
        const double period = pipe.data.clients[m].period;
        out.frequency.emplace_back(static_cast<int>(m), period,
                                   pipe.rows[m].share_pct);
        csv += std::to_string(m) + ',' + format_double(period) + ',' +
               format_double(pipe.rows[m].share_pct) + '\n';
      }
      atomic_write_file(dir / "frequency.csv", csv);
      out.rows = pipe.rows;
      out.train_accuracy = pipe.train_accuracy;
      out.test_accuracy = pipe.test_accuracy;
      atomic_write_file(dir / "valuation.csv", report_rows_csv(pipe.rows));
      atomic_write_file(
          dir / "summary.txt",
          summary_text("experiment " + preset_name(preset), cfg, pipe,
                       static_cast<int>(std::lround(cfg.total_time /
                                                    cfg.valuation_interval))));
      break;
    }
    case Preset::kRankReport: {
      cfg.mode = "sync";
      cfg.batch_size = 0;  // full batches expose the whole embedding matrix
      cfg.lr_schedule = "one_over_t";
      cfg.extra_clients.clear();
      PipelineOutcome pipe = run_sync_pipeline(cfg, false);
      const EmbeddingTrace& trace = pipe.trace;
      std::string csv = "client_id,channel,d_m,approx_eps_rank,rank_bound\n";
      for (int m = 0; m < trace.num_clients; ++m) {
        for (int c = 0; c < trace.n_channels; ++c) {
          Eigen::MatrixXd mat(trace.rounds, trace.num_samples);
          for (int t = 0; t < trace.rounds; ++t) {
            mat.row(t) = trace.observed[m][t].col(c).transpose();
          }
          const int r = approx_epsilon_rank(mat, 1e-3);
          const int bound = rank_bound(trace.client_dims[m], 1.0, trace.rounds, 0.1);
          out.ranks.emplace_back(m, c, trace.client_dims[m], r, bound);
          csv += std::to_string(m) + ',' + std::to_string(c) + ',' +
                 std::to_string(trace.client_dims[m]) + ',' + std::to_string(r) +
                 ',' + std::to_string(bound) + '\n';
        }
      }
      atomic_write_file(dir / "rank_report.csv", csv);
      out.train_accuracy = pipe.train_accuracy;
      out.test_accuracy = pipe.test_accuracy;
      std::string s;
      s += "command: experiment rank_report\n";
      s += "mode: sync\n";
      s += "clients: " + std::to_string(pipe.data.clients.size()) + "\n";
      s += "train_samples: " + std::to_string(pipe.data.train.num_samples()) + "\n";
      s += "test_samples: " + std::to_string(pipe.data.test.num_samples()) + "\n";
      s += "valuation_rounds: " + std::to_string(cfg.rounds) + "\n";
      s += "valuation_method: none\n";
      s += "epsilon: 0.001\n";
      s += "train_accuracy: " + format_double(pipe.train_accuracy) + "\n";
      s += "test_accuracy: " + format_double(pipe.test_accuracy) + "\n";
      atomic_write_file(dir / "summary.txt", s);
      break;
    }
  }
  return out;
}

}  // namespace verfed
