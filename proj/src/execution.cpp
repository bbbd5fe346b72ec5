#include <fstream>
#include <iomanip>
#include <sstream>

#include "hpl/environment.hpp"
#include "hpl/errors.hpp"

namespace hpl {

void write_execution_csv(const Execution& ex, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  const int nx = ex.states.empty() ? 0 : static_cast<int>(ex.states[0].size());
  const int nu = ex.inputs.empty() ? 0 : static_cast<int>(ex.inputs[0].size());
  os << "# env_id=" << ex.env_id << " family=" << ex.family << " dt=" << ex.dt
     << " complete=" << ex.complete << " feasible=" << ex.feasible << " score=" << ex.score
     << " nx=" << nx << " nu=" << nu << "\n";
  os << "k";
  for (int i = 0; i < nx; ++i) os << ",x" << i;
  for (int i = 0; i < nu; ++i) os << ",u" << i;
  os << "\n" << std::setprecision(17);
  for (size_t k = 0; k < ex.states.size(); ++k) {
    os << k;
    for (int i = 0; i < nx; ++i) os << "," << ex.states[k](i);
    for (int i = 0; i < nu; ++i) {
      os << ",";
      if (k < ex.inputs.size()) os << ex.inputs[k](i);
    }
    os << "\n";
  }
}

Execution read_execution_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read " + path);
  Execution ex;
  std::string line;
  int nx = -1, nu = -1;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ParseError(path + ": missing header");
  {
    std::istringstream hs(line.substr(2));
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "env_id") ex.env_id = v;
      else if (k == "family") ex.family = v;
      else if (k == "dt") ex.dt = std::stod(v);
      else if (k == "complete") ex.complete = v == "1";
      else if (k == "feasible") ex.feasible = v == "1";
      else if (k == "score") ex.score = std::stoi(v);
      else if (k == "nx") nx = std::stoi(v);
      else if (k == "nu") nu = std::stoi(v);
    }
  }
  if (nx < 0 || nu < 0) throw ParseError(path + ": header lacks nx/nu");
  std::getline(is, line);  // column names
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (static_cast<int>(cells.size()) != 1 + nx + nu) throw ParseError(path + ": bad row width");
    try {
      State x(nx);
      for (int i = 0; i < nx; ++i) x(i) = std::stod(cells[1 + i]);
      ex.states.push_back(x);
      if (!cells[1 + nx].empty()) {
        Input u(nu);
        for (int i = 0; i < nu; ++i) u(i) = std::stod(cells[1 + nx + i]);
        ex.inputs.push_back(u);
      }
    } catch (const std::exception&) {
      throw ParseError(path + ": bad number");
    }
  }
  if (ex.states.size() != ex.inputs.size() + 1) throw ParseError(path + ": states/inputs mismatch");
  return ex;
}

}  // namespace hpl
