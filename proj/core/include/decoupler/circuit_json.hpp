#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "decoupler/circuit.hpp"

namespace decoupler {

// {num_qubits, num_params, gates: [{kind, targets, axis?, param_index?, sign?, matrix?}]}
// Matrices are row-major lists of [re, im] pairs. "sign" is only written when
// it differs from +1.
nlohmann::json circuit_to_json(const Circuit& circuit);
Circuit circuit_from_json(const nlohmann::json& doc);

Circuit load_circuit(const std::filesystem::path& path);
void save_circuit(const Circuit& circuit, const std::filesystem::path& path);

/// Parses JSON text, reporting the line and column of syntax errors.
nlohmann::json parse_json_text(const std::string& text, const std::string& source_name);

}  // namespace decoupler
