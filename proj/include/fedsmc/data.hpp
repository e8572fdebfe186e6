#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedsmc/errors.hpp"
#include "fedsmc/rng.hpp"

namespace fedsmc {

struct Example {
  std::vector<double> features;
  int label = 0;  // 0 or 1
};

// One hospital's data. train/test come from a stratified 80/20 split:
// each class is shuffled and split separately, so both labels reach the
// train side whenever both are present, and the overall train fraction
// stays within one example of 80%.
struct ClientDataset {
  int client_id = 0;  // 1-based
  std::vector<Example> train;
  std::vector<Example> test;
};

// Synthetic multi-hospital task: two class-conditional Gaussians separated
// by mean_shift along a shared random unit direction, plus a per-client
// random mean offset (client_shift) that models inter-hospital drift.
struct DataConfig {
  int clients = 6;
  std::vector<int> sizes = {267, 211, 207, 199, 223, 110};
  std::vector<double> label_fracs = {0.55, 0.40, 0.62, 0.48, 0.35, 0.58};
  int input_dim = 64;
  double mean_shift = 20.0;   // distance between the two class means
  double noise_scale = 12.0;  // within-class isotropic std
  double client_shift = 1.0;  // std of the per-client mean offset
  std::uint64_t seed = 7;
};

inline void validate(const DataConfig& cfg) {
  if (cfg.clients < 1) throw UsageError("data.clients: must be >= 1");
  if (static_cast<int>(cfg.sizes.size()) != cfg.clients) {
    throw UsageError("data.sizes: need one entry per client");
  }
  if (static_cast<int>(cfg.label_fracs.size()) != cfg.clients) {
    throw UsageError("data.label_fracs: need one entry per client");
  }
  for (int n : cfg.sizes) {
    if (n < 10) throw UsageError("data.sizes: every size must be >= 10");
  }
  for (std::size_t i = 0; i < cfg.label_fracs.size(); ++i) {
    const double f = cfg.label_fracs[i];
    if (!(f >= 0.0 && f <= 1.0)) {
      throw UsageError("data.label_fracs: entries must lie in [0,1]");
    }
    // A fraction strictly inside (0,1) must yield at least one example of
    // each class, otherwise the dataset silently degenerates.
    if (f > 0.0 && f < 1.0) {
      const long pos = std::lround(cfg.sizes[i] * f);
      if (pos < 1 || pos >= cfg.sizes[i]) {
        throw UsageError(
            "data.label_fracs: fraction rounds to a single-class dataset "
            "for client " +
            std::to_string(i + 1));
      }
    }
  }
  if (cfg.input_dim < 1) throw UsageError("data.input_dim: must be >= 1");
  if (!(cfg.noise_scale > 0.0)) {
    throw UsageError("data.noise_scale: must be > 0");
  }
  if (cfg.mean_shift < 0.0) throw UsageError("data.mean_shift: must be >= 0");
  if (cfg.client_shift < 0.0) {
    throw UsageError("data.client_shift: must be >= 0");
  }
}

// Deterministic in cfg.seed. Client i gets sizes[i] examples with exactly
// lround(sizes[i] * label_fracs[i]) of class 1.
inline std::vector<ClientDataset> generate_clients(const DataConfig& cfg) {
  validate(cfg);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Shared class-separation direction, unit norm.
  std::vector<double> dir(cfg.input_dim);
  {
    auto eng = substream(cfg.seed, StreamPurpose::data_generation, 0);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& d : dir) {
        d = gauss(eng);
        norm += d * d;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& d : dir) d /= norm;
  }

  std::vector<ClientDataset> out;
  out.reserve(cfg.clients);
  for (int c = 1; c <= cfg.clients; ++c) {
    auto eng = substream(cfg.seed, StreamPurpose::data_generation,
                         static_cast<std::uint64_t>(c));
    std::vector<double> offset(cfg.input_dim);
    for (double& o : offset) o = cfg.client_shift * gauss(eng);

    const int n = cfg.sizes[c - 1];
    const int n_pos = static_cast<int>(std::lround(n * cfg.label_fracs[c - 1]));

    std::vector<Example> pos, neg;
    for (int i = 0; i < n; ++i) {
      const int label = i < n_pos ? 1 : 0;
      const double side = label == 1 ? 0.5 : -0.5;
      Example ex;
      ex.label = label;
      ex.features.resize(cfg.input_dim);
      for (int j = 0; j < cfg.input_dim; ++j) {
        ex.features[j] =
            side * cfg.mean_shift * dir[j] + offset[j] + cfg.noise_scale * gauss(eng);
      }
      (label == 1 ? pos : neg).push_back(std::move(ex));
    }

    ClientDataset ds;
    ds.client_id = c;
    auto split = [&](std::vector<Example>& cls) {
      std::shuffle(cls.begin(), cls.end(), eng);
      const auto n_train =
          static_cast<std::size_t>(std::lround(0.8 * cls.size()));
      for (std::size_t i = 0; i < cls.size(); ++i) {
        (i < n_train ? ds.train : ds.test).push_back(std::move(cls[i]));
      }
    };
    split(pos);
    split(neg);
    std::shuffle(ds.train.begin(), ds.train.end(), eng);
    std::shuffle(ds.test.begin(), ds.test.end(), eng);
    out.push_back(std::move(ds));
  }
  return out;
}

// CSV layout: header "client_id,label,f0,...,f{d-1}", one row per example.
// Rows are grouped by client in ascending id; within a client, train rows
// come first, then test rows. import_csv recovers the split positionally by
// recomputing the per-class 80/20 counts from the row labels, so a
// round-trip reproduces the datasets exactly.
inline void export_csv(const std::vector<ClientDataset>& clients,
                       std::ostream& os) {
  if (clients.empty()) throw UsageError("export_csv: no clients");
  const std::size_t dim = clients.front().train.empty()
                              ? clients.front().test.front().features.size()
                              : clients.front().train.front().features.size();
  os << "client_id,label";
  for (std::size_t j = 0; j < dim; ++j) os << ",f" << j;
  os << "\n";
  char buf[64];
  auto row = [&](int id, const Example& ex) {
    os << id << ',' << ex.label;
    for (double v : ex.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ',' << buf;
    }
    os << "\n";
  };
  for (const auto& ds : clients) {
    for (const auto& ex : ds.train) row(ds.client_id, ex);
    for (const auto& ex : ds.test) row(ds.client_id, ex);
  }
}

inline std::vector<ClientDataset> import_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError("line 1: missing header");
  ++lineno;
  if (line.rfind("client_id,label", 0) != 0) {
    throw ParseError("line 1: unexpected header '" + line + "'");
  }

  std::vector<ClientDataset> out;
  std::vector<Example> rows;
  int current_id = -1;
  std::size_t dim = 0;

  auto flush = [&]() {
    if (current_id < 0) return;
    std::size_t n_pos = 0;
    for (const auto& ex : rows) n_pos += ex.label == 1 ? 1 : 0;
    const auto n_train =
        static_cast<std::size_t>(std::lround(0.8 * n_pos)) +
        static_cast<std::size_t>(std::lround(0.8 * (rows.size() - n_pos)));
    ClientDataset ds;
    ds.client_id = current_id;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      (i < n_train ? ds.train : ds.test).push_back(std::move(rows[i]));
    }
    rows.clear();
    out.push_back(std::move(ds));
  };

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    auto next = [&]() {
      if (!std::getline(ss, tok, ',')) {
        throw ParseError("line " + std::to_string(lineno) +
                         ": truncated record");
      }
      return tok;
    };
    Example ex;
    int id = 0;
    try {
      id = std::stoi(next());
      ex.label = std::stoi(next());
      while (std::getline(ss, tok, ',')) {
        ex.features.push_back(std::stod(tok));
      }
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad number");
    }
    if (id < 1 || (ex.label != 0 && ex.label != 1)) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": bad client id or label");
    }
    if (dim == 0) dim = ex.features.size();
    if (ex.features.size() != dim || dim == 0) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": inconsistent feature count");
    }
    if (id != current_id) {
      for (const auto& ds : out) {
        if (ds.client_id == id) {
          throw ParseError("line " + std::to_string(lineno) +
                           ": client rows not contiguous");
        }
      }
      flush();
      current_id = id;
    }
    rows.push_back(std::move(ex));
  }
  flush();
  if (out.empty()) throw ParseError("line 1: no data rows");
  return out;
}

}  // namespace fedsmc
