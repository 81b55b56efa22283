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

#include "verfed/trace_io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace verfed {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

void atomic_write_file(const fs::path& file, const std::string& content) {
  fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, file);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open CSV file: " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

namespace {

void append_embedding_row(std::string& out, int client, int t, int sample,
                          const Eigen::MatrixXd& block, Eigen::Index block_row) {
  out += std::to_string(client);
  out += ',';
  out += std::to_string(t);
  out += ',';
  out += std::to_string(sample);
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    out += ',';
    out += format_double(block(block_row, c));
  }
  out += '\n';
}

std::string meta_csv(const Checkpoint& cp) {
  const bool sync = cp.mode == "sync";
  std::string s = "key,value\n";
  s += "schema,verfed-trace-v1\n";
  s += "mode," + cp.mode + "\n";
  const int M = sync ? cp.trace.num_clients
                     : static_cast<int>(cp.snapshots.empty() ? 0 : cp.snapshots[0].size());
  const int N = sync ? cp.trace.num_samples : static_cast<int>(cp.labels.size());
  const int C = sync ? cp.trace.n_channels
                     : (M > 0 ? static_cast<int>(cp.snapshots[0][0].cols()) : 0);
  const int T = sync ? cp.trace.rounds : cp.valuation_points;
  s += "clients," + std::to_string(M) + "\n";
  s += "samples," + std::to_string(N) + "\n";
  s += "channels," + std::to_string(C) + "\n";
  s += "rounds," + std::to_string(T) + "\n";
  s += "classes," + std::to_string(cp.n_classes) + "\n";
  s += "seed," + std::to_string(cp.seed) + "\n";
  return s;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& cp) {
  if (cp.mode != "sync" && cp.mode != "async") {
    throw ConfigError("save_checkpoint: mode must be sync or async");
  }
  fs::create_directories(dir);

  atomic_write_file(dir / "meta.csv", meta_csv(cp));

  {
    std::string s = "sample_id,label\n";
    for (size_t i = 0; i < cp.labels.size(); ++i) {
      s += std::to_string(i) + ',' + std::to_string(cp.labels[i]) + '\n';
    }
    atomic_write_file(dir / "labels.csv", s);
  }

  {
    std::string s = "client_id,kind,dim,period,tau\n";
    for (const auto& c : cp.clients) {
      s += std::to_string(c.client_id) + ',' + c.kind + ',' +
           std::to_string(c.dim) + ',' + format_double(c.period) + ',' +
           std::to_string(c.tau) + '\n';
    }
    atomic_write_file(dir / "clients.csv", s);
  }

  {
    std::string s = "client_id,t,sample_id,values\n";
    if (cp.mode == "sync") {
      const EmbeddingTrace& tr = cp.trace;
      for (int m = 0; m < tr.num_clients; ++m) {
        for (int i = 0; i < tr.num_samples; ++i) {
          append_embedding_row(s, m, 0, i, tr.initial[m], i);
        }
        for (int t = 1; t <= tr.rounds; ++t) {
          const auto& batch = tr.batches[t - 1];
          for (size_t j = 0; j < batch.size(); ++j) {
            append_embedding_row(s, m, t, batch[j], tr.observed[m][t - 1],
                                 static_cast<Eigen::Index>(j));
          }
        }
      }
    } else {
      for (size_t t = 0; t < cp.snapshots.size(); ++t) {
        for (size_t m = 0; m < cp.snapshots[t].size(); ++m) {
          const Eigen::MatrixXd& block = cp.snapshots[t][m];
          for (Eigen::Index i = 0; i < block.rows(); ++i) {
            append_embedding_row(s, static_cast<int>(m), static_cast<int>(t),
                                 static_cast<int>(i), block, i);
          }
        }
      }
    }
    atomic_write_file(dir / "trace.csv", s);
  }

  if (cp.mode == "sync") {
    std::string s = "client_id,t,model_norm\n";
    for (int m = 0; m < cp.trace.num_clients; ++m) {
      for (int t = 1; t <= cp.trace.rounds; ++t) {
        s += std::to_string(m) + ',' + std::to_string(t) + ',' +
             format_double(cp.trace.model_norms[m][t - 1]) + '\n';
      }
    }
    atomic_write_file(dir / "norms.csv", s);
  }

  {
    std::string s = "step,loss\n";
    for (const auto& [step, loss] : cp.loss_history) {
      s += format_double(step) + ',' + format_double(loss) + '\n';
    }
    atomic_write_file(dir / "loss.csv", s);
  }
}

void save_events_csv(const fs::path& file, const std::vector<AsyncEvent>& events) {
  std::string s = "time,client_id,seq,action,batch\n";
  for (const auto& ev : events) {
    s += format_double(ev.time) + ',' + std::to_string(ev.client_id) + ',' +
         std::to_string(ev.seq) + ',' + (ev.participated ? "update" : "skip") + ',';
    for (size_t j = 0; j < ev.batch.size(); ++j) {
      if (j) s += ';';
      s += std::to_string(ev.batch[j]);
    }
    s += '\n';
  }
  atomic_write_file(file, s);
}

namespace {

std::map<std::string, std::string> load_meta(const fs::path& dir) {
  std::map<std::string, std::string> meta;
  for (const auto& row : read_csv(dir / "meta.csv")) {
    if (row.size() >= 2 && row[0] != "key") meta[row[0]] = row[1];
  }
  return meta;
}

int meta_int(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("checkpoint meta missing key: " + key);
  return std::stoi(it->second);
}

}  // namespace

Checkpoint load_checkpoint(const fs::path& dir) {
  Checkpoint cp;
  const auto meta = load_meta(dir);
  auto mode_it = meta.find("mode");
  if (mode_it == meta.end()) throw ParseError("checkpoint meta missing mode");
  cp.mode = mode_it->second;
  const int M = meta_int(meta, "clients");
  const int N = meta_int(meta, "samples");
  const int C = meta_int(meta, "channels");
  const int T = meta_int(meta, "rounds");
  cp.n_classes = meta_int(meta, "classes");
  if (auto it = meta.find("seed"); it != meta.end()) {
    cp.seed = std::strtoull(it->second.c_str(), nullptr, 10);
  }

  cp.labels.assign(N, 0);
  for (const auto& row : read_csv(dir / "labels.csv")) {
    if (row[0] == "sample_id") continue;
    cp.labels.at(std::stoul(row[0])) = std::stoi(row[1]);
  }

  for (const auto& row : read_csv(dir / "clients.csv")) {
    if (row[0] == "client_id") continue;
    ClientInfo info;
    info.client_id = std::stoi(row[0]);
    info.kind = row[1];
    info.dim = std::stoi(row[2]);
    info.period = std::strtod(row[3].c_str(), nullptr);
    info.tau = std::stoi(row[4]);
    cp.clients.push_back(info);
  }

  // Embedding rows, grouped by (t, client).
  struct Cell {
    int sample;
    std::vector<double> values;
  };
  std::vector<std::vector<std::vector<Cell>>> grouped(
      static_cast<size_t>(T) + 1,
      std::vector<std::vector<Cell>>(static_cast<size_t>(M)));
  for (const auto& row : read_csv(dir / "trace.csv")) {
    if (row[0] == "client_id") continue;
    if (static_cast<int>(row.size()) != 3 + C) {
      throw ParseError("trace.csv row has wrong field count");
    }
    const int m = std::stoi(row[0]);
    const int t = std::stoi(row[1]);
    Cell cell;
    cell.sample = std::stoi(row[2]);
    for (int c = 0; c < C; ++c) {
      cell.values.push_back(std::strtod(row[3 + c].c_str(), nullptr));
    }
    grouped.at(t).at(m).push_back(std::move(cell));
  }

  if (cp.mode == "async") {
    cp.valuation_points = T;
    cp.snapshots.resize(static_cast<size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
      cp.snapshots[t].resize(M);
      for (int m = 0; m < M; ++m) {
        if (static_cast<int>(grouped[t][m].size()) != N) {
          throw ParseError("async checkpoint round " + std::to_string(t) +
                           " is not a full snapshot");
        }
        Eigen::MatrixXd block(N, C);
        for (const Cell& cell : grouped[t][m]) {
          for (int c = 0; c < C; ++c) block(cell.sample, c) = cell.values[c];
        }
        cp.snapshots[t][m] = std::move(block);
      }
    }
  } else {
    EmbeddingTrace& tr = cp.trace;
    tr.num_clients = M;
    tr.num_samples = N;
    tr.n_channels = C;
    tr.rounds = T;
    for (const auto& info : cp.clients) {
      if (info.client_id < M) tr.client_dims.push_back(info.dim);
    }
    tr.initial.resize(M);
    tr.batches.resize(T);
    tr.observed.assign(M, std::vector<Eigen::MatrixXd>(T));
    tr.model_norms.assign(M, std::vector<double>(T, 0.0));
    for (int m = 0; m < M; ++m) {
      if (static_cast<int>(grouped[0][m].size()) != N) {
        throw ParseError("sync checkpoint lacks the complete round-0 block");
      }
      Eigen::MatrixXd block(N, C);
      for (const Cell& cell : grouped[0][m]) {
        for (int c = 0; c < C; ++c) block(cell.sample, c) = cell.values[c];
      }
      tr.initial[m] = std::move(block);
    }
    for (int t = 1; t <= T; ++t) {
      // The batch is shared; take it from client 0's rows.
      std::vector<int> batch;
      batch.reserve(grouped[t][0].size());
      for (const Cell& cell : grouped[t][0]) batch.push_back(cell.sample);
      std::sort(batch.begin(), batch.end());
      tr.batches[t - 1] = batch;
      for (int m = 0; m < M; ++m) {
        if (grouped[t][m].size() != batch.size()) {
          throw ParseError("sync checkpoint batch mismatch at round " +
                           std::to_string(t));
        }
        Eigen::MatrixXd block(static_cast<Eigen::Index>(batch.size()), C);
        for (const Cell& cell : grouped[t][m]) {
          const auto pos = std::lower_bound(batch.begin(), batch.end(), cell.sample);
          if (pos == batch.end() || *pos != cell.sample) {
            throw ParseError("sync checkpoint batch mismatch at round " +
                             std::to_string(t));
          }
          const Eigen::Index j = pos - batch.begin();
          for (int c = 0; c < C; ++c) block(j, c) = cell.values[c];
        }
        tr.observed[m][t - 1] = std::move(block);
      }
    }
    if (fs::exists(dir / "norms.csv")) {
      for (const auto& row : read_csv(dir / "norms.csv")) {
        if (row[0] == "client_id") continue;
        const int m = std::stoi(row[0]);
        const int t = std::stoi(row[1]);
        tr.model_norms.at(m).at(t - 1) = std::strtod(row[2].c_str(), nullptr);
      }
    }
  }

  if (fs::exists(dir / "loss.csv")) {
    for (const auto& row : read_csv(dir / "loss.csv")) {
      if (row[0] == "step") continue;
      cp.loss_history.emplace_back(std::strtod(row[0].c_str(), nullptr),
                                   std::strtod(row[1].c_str(), nullptr));
    }
  }
  return cp;
}

}  // namespace verfed
