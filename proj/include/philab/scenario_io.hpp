#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "philab/phil_engine.hpp"
#include "philab/scenario.hpp"
#include "philab/stability.hpp"

namespace philab {

/// Scenario files: `key = value` lines, `#` comments, sections `[source]`,
/// `[[load]]`, `[phil]`, `[solver]`, `[[schedule]]`. Values are SI numbers
/// (unit in the key name) or double-quoted strings.
Scenario parse_scenario_text(std::string_view text);
/// ParseError (line 0) if the file cannot be read.
Scenario parse_scenario(const std::filesystem::path& path);
std::string emit_scenario(const Scenario& s);

std::optional<std::string_view> bundled_scenario_text(std::string_view name);
std::vector<std::string_view> bundled_scenario_names();

/// A readable file path wins; otherwise a bundled name.
Scenario load_scenario(std::string_view path_or_name);

/// `t_s,v_dc_bus_V,i_bus_A,i_load0_A,...,p_ref0_W,...,flags`, every
/// `decimate`-th row (the last row is always written).
void write_trace_csv(std::ostream& os, const Trace& tr, std::size_t decimate = 1);

void write_report_text(std::ostream& os, const Scenario& s, const Assessment& a);
void write_report_kv(std::ostream& os, const Scenario& s, const Assessment& a);

} // namespace philab
