#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "copresence/harness.hpp"

namespace copresence {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(const std::optional<double>& v, int digits = 6) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * *v);
  return buf;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "system,fusion,attack,classifier,tp,fp,tn,fn,fpr,fnr,f1\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    os << csv_field(r.system) << ',' << csv_field(r.fusion) << ',' << csv_field(r.attack) << ','
       << csv_field(r.classifier) << ',' << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn << ','
       << m.counts.fn << ',' << fixed(m.fpr) << ',' << fixed(m.fnr) << ',' << fixed(m.f1) << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  if (quoted) throw Error(Errc::ParseError, "unterminated quote in '" + line + "'");
  return out;
}

}  // namespace

EvalReport EvalReport::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || split_csv_line(line).size() != 11 || line.rfind("system,", 0) != 0)
    throw Error(Errc::ParseError, "not an attack-matrix CSV");
  EvalReport report;
  const auto& catalog = FeasibilityCatalog::standard();
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected 11 fields");
    ReportRow r;
    r.system = f[0];
    r.fusion = f[1];
    r.attack = f[2];
    r.classifier = f[3];
    Confusion c;
    try {
      c.tp = std::stoull(f[4]);
      c.fp = std::stoull(f[5]);
      c.tn = std::stoull(f[6]);
      c.fn = std::stoull(f[7]);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": bad counts");
    }
    r.metrics = Metrics::from(c);
    ModalitySet attacked;
    try {
      attacked = ModalitySet::parse(r.attack);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    r.attack_size = attacked.size();
    r.feasible = check_feasible(AttackSpec{attacked}, catalog).feasible;
    report.rows.push_back(std::move(r));
  }
  report.fingerprint = "from csv rows=" + std::to_string(report.rows.size());
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "# " << fingerprint << "\n";
  // One block per (system, classifier); fusions side by side.
  std::vector<std::pair<std::string, std::string>> blocks;
  std::vector<std::string> fusions, attacks;
  std::map<std::string, std::size_t> attack_size;
  std::map<std::string, bool> feasible;
  auto add_unique = [](auto& v, const auto& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  for (const auto& r : rows) {
    add_unique(blocks, std::make_pair(r.system, r.classifier));
    add_unique(fusions, r.fusion);
    add_unique(attacks, r.attack);
    attack_size[r.attack] = r.attack_size;
    feasible[r.attack] = r.feasible;
  }
  auto cell = [&](const std::string& sys, const std::string& cls, const std::string& fu,
                  const std::string& at) -> const ReportRow* {
    for (const auto& r : rows)
      if (r.system == sys && r.classifier == cls && r.fusion == fu && r.attack == at) return &r;
    return nullptr;
  };
  constexpr int kAttackWidth = 26, kCellWidth = 34;
  for (const auto& [sys, cls] : blocks) {
    os << "\n" << sys << " system, classifier " << cls << " (FPR per attack)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s", kAttackWidth, "attack");
    os << buf;
    for (const auto& fu : fusions) {
      std::snprintf(buf, sizeof buf, "%-*s", kCellWidth, fu.c_str());
      os << buf;
    }
    os << "\n";
    const char* groups[] = {"zero-modality", "single-modality", "multi-modality"};
    for (int g = 0; g < 3; ++g) {
      bool header = false;
      for (const auto& at : attacks) {
        const auto size = attack_size[at];
        if ((g == 0) != (size == 0) || (g == 1) != (size == 1)) continue;
        if (!header) {
          os << "  " << groups[g] << "\n";
          header = true;
        }
        std::string label = "  " + at + (feasible[at] ? "" : " *");
        std::snprintf(buf, sizeof buf, "%-*s", kAttackWidth, label.c_str());
        os << buf;
        for (const auto& fu : fusions) {
          const auto* r = cell(sys, cls, fu, at);
          std::string text = "-";
          if (r) {
            text = percent(r->metrics.fpr);
            if (size == 0)
              text += " (FNR: " + percent(r->metrics.fnr) + ") (F1: " + fixed(r->metrics.f1, 3) + ")";
          }
          std::snprintf(buf, sizeof buf, "%-*s", kCellWidth, text.c_str());
          os << buf;
        }
        os << "\n";
      }
    }
  }
  bool any_forced = false;
  for (const auto& [at, ok] : feasible) any_forced |= !ok;
  if (any_forced) os << "\n* outside the demonstrated manipulation catalog (run with --force)\n";
  return os.str();
}

std::string GridReport::to_csv() const {
  std::ostringstream os;
  os << "prover_class,verifier_class,channel,probe,trials,accepted,rate\n";
  for (const auto& c : cells)
    os << to_string(c.prover) << ',' << to_string(c.verifier) << ',' << to_string(c.channel) << ','
       << (probe ? "on" : "off") << ',' << c.trials << ',' << c.accepted << ',' << fixed(c.rate()) << '\n';
  return os.str();
}

std::string GridReport::to_text() const {
  std::ostringstream os;
  std::vector<ChannelPreset> channels;
  for (const auto& c : cells)
    if (std::find(channels.begin(), channels.end(), c.channel) == channels.end()) channels.push_back(c.channel);
  os << "Audio relay acceptance (FPR), probe " << (probe ? "on" : "off") << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s", "prover -> verifier");
  os << buf;
  for (auto ch : channels) {
    std::snprintf(buf, sizeof buf, "%10s", std::string(to_string(ch)).c_str());
    os << buf;
  }
  os << "\n";
  for (auto p : kAudioClasses)
    for (auto v : kAudioClasses) {
      std::string label = std::string(to_string(p)) + " -> " + std::string(to_string(v));
      std::snprintf(buf, sizeof buf, "%-18s", label.c_str());
      os << buf;
      for (auto ch : channels) {
        std::snprintf(buf, sizeof buf, "%9.0f%%", 100.0 * at(p, v, ch).rate());
        os << buf;
      }
      os << "\n";
    }
  return os.str();
}

std::string SimulationStats::to_text() const {
  std::ostringstream os;
  os << "benign sessions:   " << benign_accepted << "/" << benign_sessions << " accepted ("
     << percent(benign_sessions ? std::optional<double>(benign_rate()) : std::nullopt) << ")\n";
  os << "attacker sessions: " << attack_accepted << "/" << attack_sessions << " accepted ("
     << percent(attack_sessions ? std::optional<double>(attack_rate()) : std::nullopt) << ")\n";
  os << "rejected for invalid MAC: " << mac_invalid << ", timed out: " << timeouts
     << ", accepted with invalid MAC: " << accepted_with_invalid_mac << "\n";
  os << "held-out model FNR " << percent(model_fnr) << ", FPR " << percent(model_fpr) << "\n";
  return os.str();
}

}  // namespace copresence
