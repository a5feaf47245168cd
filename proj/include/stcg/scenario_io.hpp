#pragma once

// Scenario file: one JSON object per line (JSON Lines). See README for the
// field-by-field layout. Readers reject unknown fields and report the line
// and field path of the first problem.

#include "stcg/graph.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace stcg::graph {

inline constexpr int kScenarioSchemaVersion = 1;

class ParseError : public std::runtime_error {
  public:
    ParseError(int line, std::string field, const std::string& what);
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] const std::string& field() const { return field_; }

  private:
    int line_;
    std::string field_;
};

nlohmann::ordered_json intervention_to_json(const InterventionVector& w);
/// `at` is the field path used as error locus.
InterventionVector intervention_from_json(const nlohmann::json& j, const std::string& at = "interventions",
                                          int line = 1);

nlohmann::ordered_json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j, int line = 1);

/// Single-line canonical encoding, terminated by '\n'.
std::string write_scenario(const Scenario& s);
/// Exactly one scenario object.
Scenario read_scenario(const std::string& bytes);

std::string write_scenarios(const std::vector<Scenario>& v);
std::vector<Scenario> read_scenarios(const std::string& bytes);

} // namespace stcg::graph
