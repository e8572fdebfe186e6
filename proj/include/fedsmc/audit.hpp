#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedsmc/errors.hpp"
#include "fedsmc/params.hpp"
#include "fedsmc/protocol.hpp"

namespace fedsmc {

inline std::string participant_name(int id) {
  if (id == kServer) return "server";
  return "h" + std::to_string(id);
}

inline int parse_participant(const std::string& name) {
  if (name == "server") return kServer;
  if (name.size() >= 2 && name[0] == 'h') {
    try {
      const int k = std::stoi(name.substr(1));
      if (k >= 1) return k;
    } catch (const std::exception&) {
    }
  }
  throw ParseError("participant: unknown name '" + name + "'");
}

// FNV-1a over the raw bytes of the payload doubles, rendered as 16 hex
// digits. Identifies payloads across export/import without storing them.
inline std::string payload_digest(const WeightVector& payload) {
  std::uint64_t h = 14695981039346656037ULL;
  for (double v : payload) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

// Flat form of a Message for line-delimited export; payload is reduced to
// its size and digest.
struct MessageRecord {
  int round = 0;
  std::string sender;
  std::string receiver;
  std::string kind;
  std::size_t byte_size = 0;
  std::string digest;
};

inline MessageRecord to_record(const Message& m) {
  return {m.round,
          participant_name(m.sender),
          participant_name(m.receiver),
          to_string(m.kind),
          message_byte_size(m),
          payload_digest(m.payload)};
}

// Field order: round, sender, receiver, kind, byte_size, payload_digest;
// tab-separated, one message per line, leading '#' marks the header.
inline void export_message_log(std::ostream& os, const MessageLog& log) {
  os << "# round\tsender\treceiver\tkind\tbyte_size\tpayload_digest\n";
  for (const auto& m : log) {
    const auto r = to_record(m);
    os << r.round << '\t' << r.sender << '\t' << r.receiver << '\t' << r.kind
       << '\t' << r.byte_size << '\t' << r.digest << '\n';
  }
}

inline std::vector<MessageRecord> parse_message_log(std::istream& is) {
  std::vector<MessageRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find('\t', start);
      fields.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (fields.size() != 6) {
      throw ParseError("message log line " + std::to_string(lineno) +
                       ": expected 6 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    MessageRecord r;
    try {
      r.round = std::stoi(fields[0]);
      r.sender = fields[1];
      r.receiver = fields[2];
      r.kind = fields[3];
      r.byte_size = static_cast<std::size_t>(std::stoull(fields[4]));
      r.digest = fields[5];
      parse_participant(r.sender);
      parse_participant(r.receiver);
      parse_message_kind(r.kind);
      if (r.round < 0) throw ParseError("negative round");
    } catch (const std::exception& e) {
      throw ParseError("message log line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

struct KindStats {
  std::size_t count = 0;
  std::size_t bytes = 0;
};

// Counts and byte volumes, total and split by kind, by link class, and by
// round. Totals always equal the sum over kinds.
struct MessageStats {
  std::size_t total_count = 0;
  std::size_t total_bytes = 0;
  std::map<std::string, KindStats> by_kind;
  std::map<std::string, KindStats> by_link;  // server_hospital, hospital_hospital
  std::map<int, KindStats> per_round;
};

inline MessageStats count_messages(const std::vector<MessageRecord>& records) {
  MessageStats stats;
  for (const auto& r : records) {
    const bool server_link = parse_participant(r.sender) == kServer ||
                             parse_participant(r.receiver) == kServer;
    stats.total_count += 1;
    stats.total_bytes += r.byte_size;
    auto& kind = stats.by_kind[r.kind];
    kind.count += 1;
    kind.bytes += r.byte_size;
    auto& link =
        stats.by_link[server_link ? "server_hospital" : "hospital_hospital"];
    link.count += 1;
    link.bytes += r.byte_size;
    auto& round = stats.per_round[r.round];
    round.count += 1;
    round.bytes += r.byte_size;
  }
  return stats;
}

inline MessageStats count_messages(const MessageLog& log) {
  std::vector<MessageRecord> records;
  records.reserve(log.size());
  for (const auto& m : log) records.push_back(to_record(m));
  return count_messages(records);
}

struct Disclosure {
  int round = 0;
  int hospital = 0;  // whose true weights the payload matched
};

struct AuditReport {
  std::string strategy;
  int rounds_audited = 0;
  double tolerance = 0.0;
  // Server-received payloads matching some hospital's true post-training
  // weights within tolerance.
  std::vector<Disclosure> server_disclosures;
  // Hospital-received payloads matching another hospital's true weights.
  std::vector<Disclosure> peer_exact_disclosures;
  // Share messages parallel to another hospital's true weights after
  // max-abs normalization. Inherent to scalar-coefficient masking and
  // reported informationally, never as a failure.
  std::size_t peer_directional_count = 0;
};

// Payload-matching audit: flags any received payload within
// tol·max|w_i| (linf) of hospital i's true post-training weights, i !=
// receiver for hospitals and any i for the server. true_weights is indexed
// [round][hospital-1] and must cover exactly the rounds in the log.
inline AuditReport check_disclosure(
    const MessageLog& log,
    const std::vector<std::vector<WeightVector>>& true_weights, double tol,
    Strategy strategy) {
  if (!(tol >= 0.0)) throw UsageError("check_disclosure: tol must be >= 0");
  const int rounds = static_cast<int>(true_weights.size());
  const int hospitals =
      rounds == 0 ? 0 : static_cast<int>(true_weights[0].size());
  for (const auto& per_round : true_weights) {
    if (static_cast<int>(per_round.size()) != hospitals) {
      throw UsageError(
          "check_disclosure: uneven hospital count in true weights");
    }
  }
  std::set<int> seen_rounds;
  for (const auto& m : log) {
    if (m.round < 0 || m.round >= rounds) {
      throw UsageError("check_disclosure: log round " +
                       std::to_string(m.round) +
                       " outside the audited weight range");
    }
    if (m.sender < 0 || m.sender > hospitals || m.receiver < 0 ||
        m.receiver > hospitals) {
      throw UsageError("check_disclosure: participant outside [0, K]");
    }
    seen_rounds.insert(m.round);
  }
  if (!log.empty() && static_cast<int>(seen_rounds.size()) != rounds) {
    throw UsageError(
        "check_disclosure: log and true weights cover different rounds");
  }

  const auto matches = [tol](const WeightVector& p, const WeightVector& w) {
    return p.size() == w.size() && linf_dist(p, w) <= tol * max_abs(w);
  };
  const auto parallel = [tol](const WeightVector& p, const WeightVector& w) {
    if (p.size() != w.size()) return false;
    const double mp = max_abs(p), mw = max_abs(w);
    if (mp == 0.0 || mw == 0.0) return false;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      worst = std::max(worst, std::abs(p[i] / mp - w[i] / mw));
    }
    return worst <= tol;
  };

  std::set<std::pair<int, int>> server_hits, peer_hits;
  std::size_t directional = 0;
  for (const auto& m : log) {
    const auto& round_weights = true_weights[m.round];
    for (int i = 1; i <= hospitals; ++i) {
      if (m.receiver != kServer && i == m.receiver) continue;
      if (matches(m.payload, round_weights[i - 1])) {
        (m.receiver == kServer ? server_hits : peer_hits)
            .emplace(m.round, i);
      }
    }
    if (m.kind == MessageKind::share) {
      for (int i = 1; i <= hospitals; ++i) {
        if (i == m.receiver) continue;
        if (parallel(m.payload, round_weights[i - 1])) {
          ++directional;
          break;
        }
      }
    }
  }

  AuditReport report;
  report.strategy = to_string(strategy);
  report.rounds_audited = rounds;
  report.tolerance = tol;
  for (auto [r, k] : server_hits) report.server_disclosures.push_back({r, k});
  for (auto [r, k] : peer_hits) {
    report.peer_exact_disclosures.push_back({r, k});
  }
  report.peer_directional_count = directional;
  return report;
}

inline nlohmann::json to_json(const KindStats& s) {
  return {{"count", s.count}, {"bytes", s.bytes}};
}

inline nlohmann::json to_json(const MessageStats& stats) {
  nlohmann::json by_kind = nlohmann::json::object();
  for (const auto& [kind, s] : stats.by_kind) by_kind[kind] = to_json(s);
  nlohmann::json by_link = nlohmann::json::object();
  for (const auto& [link, s] : stats.by_link) by_link[link] = to_json(s);
  nlohmann::json per_round = nlohmann::json::array();
  for (const auto& [round, s] : stats.per_round) {
    per_round.push_back(
        {{"round", round}, {"count", s.count}, {"bytes", s.bytes}});
  }
  return {{"total_count", stats.total_count},
          {"total_bytes", stats.total_bytes},
          {"by_kind", by_kind},
          {"by_link", by_link},
          {"per_round", per_round}};
}

inline nlohmann::json to_json(const AuditReport& report) {
  const auto disclosure_list = [](const std::vector<Disclosure>& ds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : ds) {
      arr.push_back({{"round", d.round}, {"hospital", d.hospital}});
    }
    return arr;
  };
  return {{"strategy", report.strategy},
          {"rounds_audited", report.rounds_audited},
          {"tolerance", report.tolerance},
          {"server_disclosures", disclosure_list(report.server_disclosures)},
          {"peer_exact_disclosures",
           disclosure_list(report.peer_exact_disclosures)},
          {"peer_directional_count", report.peer_directional_count}};
}

}  // namespace fedsmc
