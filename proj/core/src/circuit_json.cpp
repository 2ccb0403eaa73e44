#include "decoupler/circuit_json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decoupler {

namespace {

GateKind parse_kind(const std::string& s) {
  if (s == "H") return GateKind::H;
  if (s == "X") return GateKind::X;
  if (s == "Z") return GateKind::Z;
  if (s == "CNOT") return GateKind::CNOT;
  if (s == "SWAP") return GateKind::SWAP;
  if (s == "ConstantUnitary") return GateKind::ConstantUnitary;
  if (s == "PauliRotation") return GateKind::PauliRotation;
  throw std::invalid_argument("unknown gate kind '" + s + "'");
}

PauliAxis parse_axis(const std::string& s) {
  if (s == "X") return PauliAxis::X;
  if (s == "Y") return PauliAxis::Y;
  if (s == "Z") return PauliAxis::Z;
  throw std::invalid_argument("unknown rotation axis '" + s + "'");
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw std::invalid_argument("matrix must be a nonempty array");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw std::invalid_argument("matrix must be square");
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& entry = row[static_cast<std::size_t>(c)];
      if (!entry.is_array() || entry.size() != 2) {
        throw std::invalid_argument("matrix entries must be [re, im] pairs");
      }
      m(r, c) = Complex(entry[0].get<double>(), entry[1].get<double>());
    }
  }
  return m;
}

}  // namespace

nlohmann::json circuit_to_json(const Circuit& circuit) {
  nlohmann::json gates = nlohmann::json::array();
  for (const GateOp& g : circuit.gates()) {
    nlohmann::json j;
    j["kind"] = to_string(g.kind);
    j["targets"] = g.targets;
    if (g.kind == GateKind::PauliRotation) {
      j["axis"] = to_string(g.axis);
      j["param_index"] = g.param_index;
      if (g.sign != 1.0) j["sign"] = g.sign;
    }
    if (g.kind == GateKind::ConstantUnitary) j["matrix"] = matrix_to_json(*g.matrix);
    gates.push_back(std::move(j));
  }
  return {{"num_qubits", circuit.num_qubits()},
          {"num_params", circuit.num_params()},
          {"gates", std::move(gates)}};
}

Circuit circuit_from_json(const nlohmann::json& doc) {
  try {
    const int n = doc.at("num_qubits").get<int>();
    const int k = doc.value("num_params", 0);
    std::vector<GateOp> gates;
    for (const auto& j : doc.at("gates")) {
      GateOp g;
      g.kind = parse_kind(j.at("kind").get<std::string>());
      g.targets = j.at("targets").get<std::vector<int>>();
      if (g.kind == GateKind::PauliRotation) {
        g.axis = parse_axis(j.at("axis").get<std::string>());
        g.param_index = j.at("param_index").get<int>();
        g.sign = j.value("sign", 1.0);
        if (g.sign != 1.0 && g.sign != -1.0) throw std::invalid_argument("rotation sign must be +1 or -1");
      }
      if (g.kind == GateKind::ConstantUnitary) {
        g.matrix = std::make_shared<const Matrix>(matrix_from_json(j.at("matrix")));
      }
      gates.push_back(std::move(g));
    }
    return Circuit(n, std::move(gates), k);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed circuit document: ") + e.what());
  }
}

nlohmann::json parse_json_text(const std::string& text, const std::string& source_name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::size_t begin = text.rfind('\n', stop == 0 ? 0 : stop - 1);
    begin = (begin == std::string::npos || stop == 0) ? 0 : begin + 1;
    std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    std::ostringstream msg;
    msg << source_name << ":" << line << ":" << column << ": JSON syntax error\n  "
        << text.substr(begin, end - begin);
    throw std::invalid_argument(msg.str());
  }
}

Circuit load_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open circuit file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return circuit_from_json(parse_json_text(buf.str(), path.string()));
}

void save_circuit(const Circuit& circuit, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << circuit_to_json(circuit).dump(2) << '\n';
}

}  // namespace decoupler
