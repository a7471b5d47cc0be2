#ifndef TPPLAB_IO_HPP
#define TPPLAB_IO_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpplab/diagnose.hpp"
#include "tpplab/events.hpp"
#include "tpplab/infer.hpp"
#include "tpplab/models.hpp"

namespace tpp::io {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Numeric formatting used in artifacts: %.9g for times, %.17g for draws.
std::string fmt_g(double v, int digits);

enum class TimeEncoding { Iso8601, EpochSeconds };
const char* to_string(TimeEncoding e);

// Parses an ISO-8601 timestamp or fractional seconds since epoch onto the
// 250 ms grid. Off-grid values throw unless tolerate_offgrid rounds them to
// the nearest grid point.
Tick parse_timestamp(const std::string& text, TimeEncoding encoding, bool tolerate_offgrid);
TimeEncoding detect_encoding(const std::string& text);

struct AnnotationFile {
  std::vector<RawAnnotation> annotations;
  TimeEncoding encoding = TimeEncoding::Iso8601;
};

struct SessionFile {
  std::vector<SessionRecord> sessions;
  TimeEncoding encoding = TimeEncoding::Iso8601;
};

// CSV headers: participant_id,session_id,behavior,start,stop and
// session_id,participant_id,session_start,session_end. Parse errors carry
// the 1-based row number.
AnnotationFile read_annotations_csv(const std::filesystem::path& path, bool tolerate_offgrid);
SessionFile read_sessions_csv(const std::filesystem::path& path, bool tolerate_offgrid);

// Full preprocessing pipeline: collapse episodes per session, normalize to
// minutes, record dedup counts and encodings in the dataset metadata.
Dataset ingest(const AnnotationFile& annotations, const SessionFile& sessions);

// Canonical dataset file: JSON lines {"session_id":...,"T":...,"onsets":[...]},
// minutes at 9 significant digits.
void write_dataset_jsonl(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_jsonl(const std::filesystem::path& path);

void write_validation_json(const ValidationReport& report, const std::filesystem::path& path);

// ParamSet JSON: {"family": "...", "params": {...}}.
std::string param_set_to_json(const ParamSet& params);
ParamSet param_set_from_json(const std::string& text);
ParamSet read_params_file(const std::filesystem::path& path);

// Prior file JSON: {"<param>": ["gamma", shape, rate] | ["uniform", lo, hi]}.
PriorSpec read_prior_file(const std::filesystem::path& path, ModelFamily family);

// Posterior archive directory: draws.csv (chain, draw, parameters),
// diagnostics.csv (summary-table layout), config.json.
void write_archive(const PosteriorSamples& samples, const ChainConfig& cfg,
                   const PriorSpec& prior, const std::filesystem::path& dir);
PosteriorSamples read_archive(const std::filesystem::path& dir);

void write_diagnostic_report(const DiagnosticReport& report, const std::filesystem::path& dir);

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path -> sha256
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string config_json;      // command-specific snapshot, already serialized
  std::string consumed_manifest_hash;  // upstream manifest this run consumed, if any
};

// Every output directory holds exactly one manifest.json; contents are a pure
// function of inputs and flags (no wall-clock fields).
void write_manifest(const Manifest& manifest, const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace tpp::io

#endif
