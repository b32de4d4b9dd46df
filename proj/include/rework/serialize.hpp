#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rework/cate.hpp"
#include "rework/data.hpp"
#include "rework/dml.hpp"
#include "rework/learners.hpp"
#include "rework/pca.hpp"
#include "rework/policy.hpp"
#include "rework/simulate.hpp"

namespace rework {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Versioned documents carry {"format": ..., "version": 1}.
void to_json(json& j, const LotDataset& v);
void from_json(const json& j, LotDataset& v);
void to_json(json& j, const PcaModel& v);
void from_json(const json& j, PcaModel& v);
void to_json(json& j, const CsvSchema& v);
void from_json(const json& j, CsvSchema& v);
void to_json(json& j, const DgpConfig& v);
void from_json(const json& j, DgpConfig& v);
void to_json(json& j, const OracleTruth& v);
void to_json(json& j, const Hyperparameters& v);
void from_json(const json& j, Hyperparameters& v);
void to_json(json& j, const LearnerSpec& v);
void from_json(const json& j, LearnerSpec& v);
void to_json(json& j, const TrimBounds& v);
void from_json(const json& j, TrimBounds& v);
void to_json(json& j, const EffectEstimate& v);
void from_json(const json& j, EffectEstimate& v);
void to_json(json& j, const ScoreElements& v);
void from_json(const json& j, ScoreElements& v);
void to_json(json& j, const NuisanceRmse& v);
void to_json(json& j, const BasisSpec& v);
void from_json(const json& j, BasisSpec& v);
void to_json(json& j, const SplineBasis& v);
SplineBasis spline_basis_from_json(const json& j);
void to_json(json& j, const CateFit& v);
CateFit cate_fit_from_json(const json& j);
void to_json(json& j, const Policy& v);
Policy policy_from_json(const json& j);

/// FNV-1a digest (16 hex digits) of a sequence of doubles, bitwise.
std::string digest(const std::vector<double>& values);

/// Shortest round-trip decimal form of a double ("nan"/"inf" for non-finite).
std::string format_double(double v);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& doc);
void write_text_file(const std::string& path, const std::string& text);

/// Fields of one CSV line; double quotes group and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);
/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s);

/// `lot_id,psi_a,psi_b` CSV.
void write_scores_csv(const std::string& path, const std::vector<std::string>& lot_id,
                      const ScoreElements& scores);
ScoreElements read_scores_csv(const std::string& path, std::vector<std::string>* lot_id = nullptr);

}  // namespace rework
