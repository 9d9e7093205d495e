#ifndef FORAY_EMITTER_HPP
#define FORAY_EMITTER_HPP

#include <string>
#include <string_view>

#include "foray/model.hpp"

namespace foray {

inline constexpr std::string_view kReportSchema = "foray-report";
inline constexpr int kReportVersion = 1;

/// Array-reference text for one surviving reference, e.g.
/// "A4002a0[2147440948+1*i15+103*i12]". Innermost iterator first; zero
/// terms omitted. Empty for a non-analyzable reference.
std::string expression_text(const ForayModel& model, const ReferenceResult& ref);

/// C-like loop-nest text for every surviving reference. Nests are shared
/// between references in the same loops; each nesting level indents by one
/// space; every line ends in '\n'. An empty model yields "".
std::string emit_c(const ForayModel& model);

/// JSON report (schema "foray-report", version 1). See docs/report-schema.md.
std::string emit_report(const ForayModel& model);

/// Reads back the "stats" object of a report produced by emit_report.
/// Throws std::runtime_error on a schema mismatch.
ModelStats parse_report_stats(std::string_view report);

/// Human-readable stats table (references / accesses / footprint per
/// category).
std::string format_stats(const ModelStats& stats);

}  // namespace foray

#endif  // FORAY_EMITTER_HPP
