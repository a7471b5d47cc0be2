#include "tpplab/io.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tpp::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// SHA-256

namespace {

struct Sha256 {
  std::uint32_t h[8] = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                        0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
  std::array<std::uint8_t, 64> block{};
  std::size_t block_len = 0;
  std::uint64_t total_len = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void compress(const std::uint8_t* p) {
    static constexpr std::uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                  hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    total_len += len;
    while (len > 0) {
      const std::size_t take = std::min(len, block.size() - block_len);
      std::memcpy(block.data() + block_len, p, take);
      block_len += take;
      p += take;
      len -= take;
      if (block_len == block.size()) {
        compress(block.data());
        block_len = 0;
      }
    }
  }

  std::string hex_digest() {
    const std::uint64_t bits = total_len * 8;
    const std::uint8_t pad = 0x80;
    update(&pad, 1);
    const std::uint8_t zero = 0;
    while (block_len != 56) update(&zero, 1);
    std::uint8_t len_be[8];
    for (int i = 0; i < 8; ++i) len_be[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    total_len -= 9;  // padding does not count
    update(len_be, 8);
    char out[65];
    for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 64);
  }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 s;
  s.update(bytes.data(), bytes.size());
  return s.hex_digest();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

std::string fmt_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Timestamps

const char* to_string(TimeEncoding e) {
  return e == TimeEncoding::Iso8601 ? "iso8601" : "epoch_seconds";
}

TimeEncoding detect_encoding(const std::string& text) {
  // ISO timestamps contain date separators; epoch values are plain decimals.
  if (text.find(':') != std::string::npos || text.find('T') != std::string::npos)
    return TimeEncoding::Iso8601;
  if (text.find('-') != std::string::npos && text.find('-') != 0) return TimeEncoding::Iso8601;
  return TimeEncoding::EpochSeconds;
}

namespace {

// Days since 1970-01-01 (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const int yoe = y - era * 400;
  const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + doe - 719468;
}

Tick grid_round(double seconds, bool tolerate_offgrid, const std::string& text) {
  const double ticks = seconds * 4.0;
  const double rounded = std::nearbyint(ticks);
  if (std::fabs(ticks - rounded) > 4e-3 && !tolerate_offgrid)
    throw InputError("timestamp '" + text + "' is off the 250 ms annotation grid");
  return static_cast<Tick>(rounded);
}

}  // namespace

Tick parse_timestamp(const std::string& text, TimeEncoding encoding, bool tolerate_offgrid) {
  if (encoding == TimeEncoding::EpochSeconds) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &pos);
    } catch (const std::exception&) {
      throw InputError("bad epoch timestamp '" + text + "'");
    }
    if (pos != text.size()) throw InputError("bad epoch timestamp '" + text + "'");
    return grid_round(v, tolerate_offgrid, text);
  }

  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n != 7 || (sep != 'T' && sep != ' '))
    throw InputError("bad ISO-8601 timestamp '" + text + "'");
  const double seconds =
      static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
  return grid_round(seconds, tolerate_offgrid, text);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header)
    throw InputError(path.string() + " row 1: expected header '" + expected_header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace

AnnotationFile read_annotations_csv(const fs::path& path, bool tolerate_offgrid) {
  const auto rows = read_csv(path, "participant_id,session_id,behavior,start,stop");
  AnnotationFile out;
  bool encoding_set = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row_no = std::to_string(i + 2);  // 1-based, after header
    const auto& r = rows[i];
    if (r.size() != 5)
      throw InputError(path.string() + " row " + row_no + ": expected 5 fields");
    try {
      RawAnnotation a;
      a.participant_id = r[0];
      a.session_id = r[1];
      a.behavior = behavior_from_string(r[2]);
      if (!encoding_set) {
        out.encoding = detect_encoding(r[3]);
        encoding_set = true;
      }
      a.start = parse_timestamp(r[3], out.encoding, tolerate_offgrid);
      a.stop = parse_timestamp(r[4], out.encoding, tolerate_offgrid);
      if (a.stop < a.start) throw InputError("stop precedes start");
      out.annotations.push_back(std::move(a));
    } catch (const std::exception& e) {
      throw InputError(path.string() + " row " + row_no + ": " + e.what());
    }
  }
  return out;
}

SessionFile read_sessions_csv(const fs::path& path, bool tolerate_offgrid) {
  const auto rows = read_csv(path, "session_id,participant_id,session_start,session_end");
  SessionFile out;
  bool encoding_set = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row_no = std::to_string(i + 2);
    const auto& r = rows[i];
    if (r.size() != 4)
      throw InputError(path.string() + " row " + row_no + ": expected 4 fields");
    try {
      SessionRecord s;
      s.session_id = r[0];
      s.participant_id = r[1];
      if (!encoding_set) {
        out.encoding = detect_encoding(r[2]);
        encoding_set = true;
      }
      s.session_start = parse_timestamp(r[2], out.encoding, tolerate_offgrid);
      s.session_end = parse_timestamp(r[3], out.encoding, tolerate_offgrid);
      if (s.session_end <= s.session_start) throw InputError("session_end precedes start");
      out.sessions.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw InputError(path.string() + " row " + row_no + ": " + e.what());
    }
  }
  return out;
}

Dataset ingest(const AnnotationFile& annotations, const SessionFile& sessions) {
  std::map<std::string, std::vector<RawAnnotation>> by_session;
  for (const auto& a : annotations.annotations) by_session[a.session_id].push_back(a);

  Dataset ds;
  std::size_t dedup = 0;
  for (const auto& session : sessions.sessions) {
    const auto it = by_session.find(session.session_id);
    std::span<const RawAnnotation> anns =
        it != by_session.end() ? std::span<const RawAnnotation>(it->second)
                               : std::span<const RawAnnotation>();
    const auto onsets = collapse_episodes(anns, session);
    ds.sequences.push_back(normalize_session(onsets, session, &dedup));
    ds.metadata["participant:" + session.session_id] = session.participant_id;
    if (it != by_session.end()) by_session.erase(it);
  }
  if (!by_session.empty())
    throw InputError("annotations reference unknown session " + by_session.begin()->first);
  ds.metadata["dedup_count"] = std::to_string(dedup);
  ds.metadata["time_encoding_annotations"] = to_string(annotations.encoding);
  ds.metadata["time_encoding_sessions"] = to_string(sessions.encoding);
  ds.check_unique_ids();
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset JSONL

void write_dataset_jsonl(const Dataset& ds, const fs::path& path) {
  std::ostringstream out;
  for (const auto& seq : ds.sequences) {
    out << "{\"session_id\":" << json(seq.session_id()).dump()
        << ",\"T\":" << fmt_g(seq.duration(), 9) << ",\"onsets\":[";
    bool first = true;
    for (double t : seq.onsets()) {
      if (!first) out << ',';
      out << fmt_g(t, 9);
      first = false;
    }
    out << "]}\n";
  }
  // Metadata rides along as a trailing object so a dataset file is
  // self-contained; readers distinguish it by the absence of session_id.
  if (!ds.metadata.empty()) {
    json meta(ds.metadata);
    out << "{\"metadata\":" << meta.dump() << "}\n";
  }
  write_text_file(path, out.str());
}

Dataset read_dataset_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("metadata")) {
      for (const auto& [k, v] : j["metadata"].items())
        ds.metadata[k] = v.get<std::string>();
      continue;
    }
    try {
      ds.sequences.emplace_back(j.at("session_id").get<std::string>(),
                                j.at("onsets").get<std::vector<double>>(),
                                j.at("T").get<double>());
    } catch (const std::exception& e) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  ds.check_unique_ids();
  return ds;
}

void write_validation_json(const ValidationReport& report, const fs::path& path) {
  ordered_json j;
  j["n_sequences"] = report.n_sequences;
  j["n_onsets"] = report.n_onsets;
  j["total_minutes"] = report.total_minutes;
  j["violations"] = report.violations;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"participant_id", r.participant_id},
                    {"onsets", r.onsets},
                    {"sessions", r.sessions},
                    {"total_minutes", r.total_minutes},
                    {"minutes_per_session", r.minutes_per_session}});
  }
  j["participants"] = rows;
  auto col = [](const ColumnSummary& s) {
    return ordered_json{{"mean", s.mean}, {"median", s.median}, {"sd", s.sd}};
  };
  j["summary"] = {{"onsets", col(report.onsets_summary)},
                  {"sessions", col(report.sessions_summary)},
                  {"total_minutes", col(report.minutes_summary)},
                  {"minutes_per_session", col(report.minutes_per_session_summary)}};
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ParamSet / prior files

std::string param_set_to_json(const ParamSet& params) {
  ordered_json j;
  j["family"] = to_string(params.family());
  ordered_json p;
  const auto names = param_names(params.family());
  const auto values = params.values();
  for (std::size_t i = 0; i < names.size(); ++i)
    p[names[i]] = json::parse(fmt_g(values[i], 17));
  j["params"] = p;
  return j.dump();
}

ParamSet param_set_from_json(const std::string& text) {
  const auto j = json::parse(text);
  const auto family = family_from_string(j.at("family").get<std::string>());
  std::map<std::string, double> named;
  for (const auto& [k, v] : j.at("params").items()) named[k] = v.get<double>();
  return ParamSet::from_named(family, named);
}

ParamSet read_params_file(const fs::path& path) {
  try {
    return param_set_from_json(read_text_file(path));
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

PriorSpec read_prior_file(const fs::path& path, ModelFamily family) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  PriorSpec spec = PriorSpec::defaults(family);
  const auto names = param_names(family);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (key != names[i]) continue;
      known = true;
      if (!value.is_array() || value.size() != 3)
        throw InputError(path.string() + ": prior for " + key +
                         " must be [\"gamma\"|\"uniform\", a, b]");
      const auto kind = value[0].get<std::string>();
      const double a = value[1].get<double>(), b = value[2].get<double>();
      if (kind == "gamma")
        spec.params[i] = ParamPrior::gamma(a, b);
      else if (kind == "uniform")
        spec.params[i] = ParamPrior::uniform(a, b);
      else
        throw InputError(path.string() + ": unknown prior family '" + kind + "'");
    }
    if (!known)
      throw InputError(path.string() + ": no parameter named '" + key + "' in " +
                       to_string(family));
  }
  spec.validate(family);
  return spec;
}

// ---------------------------------------------------------------------------
// Posterior archive

namespace {

ordered_json prior_to_json(const PriorSpec& prior, ModelFamily family) {
  ordered_json j;
  const auto names = param_names(family);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& p = prior.params[i];
    j[names[i]] = {p.type == ParamPrior::Type::Gamma ? "gamma" : "uniform", p.a, p.b};
  }
  return j;
}

}  // namespace

void write_archive(const PosteriorSamples& samples, const ChainConfig& cfg,
                   const PriorSpec& prior, const fs::path& dir) {
  fs::create_directories(dir);
  const auto names = param_names(samples.family());

  std::ostringstream draws;
  draws << "chain,draw";
  for (const char* n : names) draws << ',' << n;
  draws << '\n';
  for (std::size_t c = 0; c < samples.n_chains(); ++c) {
    for (std::size_t d = 0; d < samples.n_draws(); ++d) {
      draws << c << ',' << d;
      for (std::size_t p = 0; p < samples.n_params(); ++p)
        draws << ',' << fmt_g(samples.at(c, d, p), 17);
      draws << '\n';
    }
  }
  write_text_file(dir / "draws.csv", draws.str());

  std::ostringstream diag;
  diag << "parameter,mcse_mean,mcse_sd,ess_bulk,ess_tail,r_hat,mean,sd,q5,median,q95\n";
  const auto& ds = samples.diagnostics();
  for (std::size_t p = 0; p < ds.size(); ++p) {
    const auto& d = ds[p];
    diag << names[p] << ',';
    if (d.defined) {
      diag << fmt_g(d.mcse_mean, 9) << ',' << fmt_g(d.mcse_sd, 9) << ',' << fmt_g(d.ess_bulk, 9)
           << ',' << fmt_g(d.ess_tail, 9) << ',' << fmt_g(d.r_hat, 9);
    } else {
      diag << ",,,,";
    }
    diag << ',' << fmt_g(d.mean, 9) << ',' << fmt_g(d.sd, 9) << ',' << fmt_g(d.q5, 9) << ','
         << fmt_g(d.q50, 9) << ',' << fmt_g(d.q95, 9) << '\n';
  }
  write_text_file(dir / "diagnostics.csv", diag.str());

  ordered_json config;
  config["family"] = to_string(samples.family());
  config["sampler"] = cfg.sampler == SamplerKind::Nuts ? "nuts" : "random_walk";
  config["n_chains"] = cfg.n_chains;
  config["warmup"] = cfg.warmup;
  config["draws"] = cfg.draws;
  config["target_accept"] = cfg.target_accept;
  config["max_tree_depth"] = cfg.max_tree_depth;
  config["seed"] = cfg.seed;
  config["divergences"] = samples.divergences();
  config["priors"] = prior_to_json(prior, samples.family());
  config["gamma_parameterization"] = "shape_rate";
  config["rng"] = rng::kGeneratorName;
  write_text_file(dir / "config.json", config.dump(2) + "\n");
}

PosteriorSamples read_archive(const fs::path& dir) {
  json config;
  try {
    config = json::parse(read_text_file(dir / "config.json"));
  } catch (const std::exception& e) {
    throw InputError((dir / "config.json").string() + ": " + e.what());
  }
  const auto family = family_from_string(config.at("family").get<std::string>());
  const auto n_chains = config.at("n_chains").get<std::size_t>();
  const auto n_draws = config.at("draws").get<std::size_t>();

  PosteriorSamples samples(family, n_chains, n_draws);
  std::ifstream in(dir / "draws.csv");
  if (!in) throw InputError("cannot open " + (dir / "draws.csv").string());
  std::string line;
  std::getline(in, line);  // header
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2 + samples.n_params())
      throw InputError((dir / "draws.csv").string() + ": bad row " + std::to_string(row + 2));
    const auto chain = static_cast<std::size_t>(std::stoull(fields[0]));
    const auto draw = static_cast<std::size_t>(std::stoull(fields[1]));
    if (chain >= n_chains || draw >= n_draws)
      throw InputError((dir / "draws.csv").string() + ": index out of range at row " +
                       std::to_string(row + 2));
    for (std::size_t p = 0; p < samples.n_params(); ++p)
      samples.at(chain, draw, p) = std::stod(fields[2 + p]);
    ++row;
  }
  if (row != n_chains * n_draws)
    throw InputError((dir / "draws.csv").string() + ": expected " +
                     std::to_string(n_chains * n_draws) + " rows, found " + std::to_string(row));
  samples.set_divergences(config.value("divergences", 0));
  return samples;
}

// ---------------------------------------------------------------------------
// Diagnostic report directory

void write_diagnostic_report(const DiagnosticReport& report, const fs::path& dir) {
  fs::create_directories(dir);

  std::ostringstream qq;
  qq << "theoretical,empirical\n";
  for (std::size_t i = 0; i < report.qq.empirical.size(); ++i)
    qq << fmt_g(report.qq.theoretical[i], 9) << ',' << fmt_g(report.qq.empirical[i], 9) << '\n';
  write_text_file(dir / "qq.csv", qq.str());

  std::ostringstream res;
  res << "session_id,n_events,residual\n";
  for (std::size_t i = 0; i < report.residuals.size(); ++i)
    res << report.residual_sessions[i] << ',' << report.residuals[i].n_events << ','
        << fmt_g(report.residuals[i].residual, 9) << '\n';
  write_text_file(dir / "residuals.csv", res.str());

  std::ostringstream cm;
  cm << "trial,count\n";
  for (std::size_t t = 0; t < report.model_count_trials.size(); ++t)
    for (long c : report.model_count_trials[t]) cm << t << ',' << c << '\n';
  write_text_file(dir / "counts_model.csv", cm.str());

  std::ostringstream ce;
  ce << "count\n";
  for (long c : report.empirical_counts) ce << c << '\n';
  write_text_file(dir / "counts_empirical.csv", ce.str());

  std::ostringstream kde;
  kde << "grid,model_density,empirical_density\n";
  for (std::size_t i = 0; i < report.kde_model.grid.size(); ++i) {
    const double emp =
        i < report.kde_empirical.density.size() ? report.kde_empirical.density[i] : 0.0;
    kde << fmt_g(report.kde_model.grid[i], 9) << ',' << fmt_g(report.kde_model.density[i], 9)
        << ',' << fmt_g(emp, 9) << '\n';
  }
  write_text_file(dir / "kde.csv", kde.str());

  std::ostringstream rip;
  rip << "session_id,lag,k_hat,reference\n";
  for (const auto& curve : report.ripley) {
    for (std::size_t l = 0; l < report.ripley_lags.size(); ++l)
      rip << curve.session_id << ',' << fmt_g(report.ripley_lags[l], 9) << ','
          << fmt_g(curve.k_hat[l], 9) << ',' << fmt_g(2.0 * report.ripley_lags[l], 9) << '\n';
  }
  write_text_file(dir / "ripley.csv", rip.str());

  std::ostringstream audit;
  audit << "source,n_sessions,q90_mean,q90_sd,q95_mean,q95_sd,q99_mean,q99_sd,max_mean,max_sd,"
           "n_mean,n_sd,q95_q90_mean,q95_q90_sd,q99_q95_mean,q99_q95_sd,max_q99_mean,"
           "max_q99_sd,outliers_mean,outliers_sd\n";
  for (const auto& row : report.audit) {
    audit << row.source << ',' << row.n_sessions;
    const double cols[] = {row.q90_mean,    row.q90_sd,    row.q95_mean,   row.q95_sd,
                           row.q99_mean,    row.q99_sd,    row.max_mean,   row.max_sd,
                           row.n_mean,      row.n_sd,      row.r9590_mean, row.r9590_sd,
                           row.r9995_mean,  row.r9995_sd,  row.rmax99_mean, row.rmax99_sd,
                           row.outlier_mean, row.outlier_sd};
    for (double v : cols) audit << ',' << fmt_g(v, 9);
    audit << '\n';
  }
  write_text_file(dir / "quantile_audit.csv", audit.str());

  ordered_json j;
  j["posterior_ref"] = report.posterior_ref;
  j["seed"] = report.seed;
  j["wd_mean"] = report.wd_mean;
  j["wd_sd"] = report.wd_sd;
  j["n_trials"] = report.model_count_trials.size();
  j["kde_bandwidth_model"] = report.kde_model.bandwidth;
  j["kde_bandwidth_empirical"] = report.kde_empirical.bandwidth;
  j["n_qq_points"] = report.qq.empirical.size();
  // The censored interval after each session's last onset contributes no
  // transformed gap to the QQ pool.
  j["qq_censored_tail"] = "excluded";
  j["empty_audit"] = report.audit.empty() ||
                     (!report.audit.empty() && report.audit.front().n_sessions == 0);
  write_text_file(dir / "report.json", j.dump(2) + "\n");
}

void write_manifest(const Manifest& manifest, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json j;
  j["tool"] = "tpplab";
  j["version"] = "0.1.0";
  j["command"] = manifest.command;
  j["argv"] = manifest.argv;
  ordered_json inputs;
  for (const auto& [path, hash] : manifest.input_hashes) inputs[path] = hash;
  j["inputs"] = inputs;
  j["outputs"] = manifest.outputs;
  j["seed"] = manifest.seed;
  j["rng"] = rng::kGeneratorName;
  if (!manifest.consumed_manifest_hash.empty())
    j["consumed_manifest"] = manifest.consumed_manifest_hash;
  if (!manifest.config_json.empty()) j["config"] = json::parse(manifest.config_json);
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace tpp::io
