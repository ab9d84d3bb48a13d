#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "stepdeconv/estimator.hpp"
#include "stepdeconv/experiments.hpp"
#include "stepdeconv/inference.hpp"
#include "stepdeconv/model.hpp"

namespace stepdeconv {

// Dataset CSV: header `x,y`, one observation per row. Rows are sorted by x
// on read. Throws ParseError naming the offending line; a file without data
// rows is an error.
Dataset parse_csv(std::string_view text);
Dataset read_csv(const std::filesystem::path& path);
// Shortest round-trip decimal representation of every value.
std::string format_csv(const Dataset& data);

// Sidecar record of a simulated dataset: kernel, truth theta and record, sigma, seed.
std::string truth_to_json(const Dataset& data);

std::string fit_to_json(const FitResult& fit, const Kernel& k);
std::string inference_to_json(const InferenceReport& rep, const Kernel& k);

std::string rate_report_to_json(const RateReport& rep, const Scenario& s);
std::string coverage_report_to_json(const CoverageReport& rep, const Scenario& s);
std::string selection_report_to_json(const SelectionReport& rep, const Scenario& s);
std::string normality_report_to_json(const NormalityReport& rep, const Scenario& s);

// Flat tables with columns n,rep,<value columns> for external plotting.
std::string rate_report_to_csv(const RateReport& rep);
std::string coverage_report_to_csv(const CoverageReport& rep);
std::string selection_report_to_csv(const SelectionReport& rep);
std::string normality_report_to_csv(const NormalityReport& rep);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Shortest decimal string that reads back to exactly `v`.
std::string format_double(double v);

}  // namespace stepdeconv
