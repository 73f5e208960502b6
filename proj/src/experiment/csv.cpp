#include "stablab/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>

namespace stablab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv_preamble(std::ostream& out, const std::string& schema, bool timestamp) {
  out << "# schema: " << schema << "\n";
  if (timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    out << "# generated: " << buf << "\n";
  }
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    const std::string& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char ch : c) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    } else {
      out << c;
    }
  }
  out << '\n';
}

std::vector<std::string> replicate_columns() {
  return {"problem", "n",   "t",   "replicate",           "seed",       "emp_risk", "pop_risk",
          "gap",     "stability_pair_diff", "halt_reason", "opt_gap", "excess", "grad_norm"};
}

std::vector<std::string> replicate_cells(const std::string& problem, const ReplicateRecord& r) {
  return {problem,
          std::to_string(r.n),
          std::to_string(r.t),
          std::to_string(r.replicate),
          std::to_string(r.seed),
          format_double(r.emp_risk),
          format_double(r.pop_risk),
          format_double(r.gap),
          format_double(r.stability_pair_diff),
          to_string(r.halt),
          r.opt_gap ? format_double(*r.opt_gap) : "",
          format_double(r.excess),
          format_double(r.grad_norm)};
}

}  // namespace stablab
