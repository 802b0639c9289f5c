#pragma once

#include <string>

#include "json.hpp"

#include "actangle/chart.hpp"
#include "actangle/verify.hpp"

namespace actangle {

using Json = nlohmann::json;

inline constexpr int kChartFormatVersion = 1;
inline constexpr const char* kConventionTag =
    "z=(q,p); omega=sum dp^dq; X_F=(dF/dp,-dF/dq); chart=(I_noncompact,I_compact,x,phi); phi in [0,2pi)";

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j);
/// Matrices are stored as a list of columns with an explicit row count.
Json mat_to_json(const Mat& m);
Mat mat_from_json(const Json& j);

Json options_to_json(const ChartOptions& o);
/// Missing keys keep their defaults; unknown keys are rejected.
ChartOptions options_from_json(const Json& j);

Json coverage_to_json(const SearchCoverage& c);
Json lattice_to_json(const PeriodLattice& l);
Json report_to_json(const VerificationReport& r);
Json fit_report_to_json(const GaugeFitReport& r);

/// Versioned chart document. Doubles are written in shortest round-trip form, so reading
/// the document back reproduces every stored number bit for bit.
Json chart_to_json(const Chart& chart);
Chart chart_from_json(const Json& j);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace actangle
