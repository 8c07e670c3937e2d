#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "macsvm/trainer.hpp"

namespace macsvm {

inline constexpr int kModelFormatVersion = 1;

/// Self-describing JSON; every real is a hex-float string, so a round trip
/// reproduces all numeric fields bit for bit. The thread count is not stored.
std::string model_to_json(const TrainedModel& model);
/// Throws ParseError on malformed input or a format_version mismatch.
TrainedModel model_from_json(const std::string& text);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

std::string hex_double(double x);
double parse_hex_double(const std::string& s);

/// Header row, then one comma-separated row per stage:
/// stage,iter,mu,penalty,nested,train_error,val_error (reals at %.17g).
void write_trace(const std::filesystem::path& path, const std::vector<StageRecord>& stages);

}  // namespace macsvm
