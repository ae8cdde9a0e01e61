#pragma once

// Time series of named scalar diagnostics plus free-form warnings.

#include <ostream>
#include <string>
#include <vector>

namespace momap {

struct DiagnosticSample {
  double t;
  std::string name;
  double value;
};

struct Diagnostics {
  std::vector<DiagnosticSample> samples;
  std::vector<std::string> warnings;

  void record(double t, std::string name, double value) { samples.push_back({t, std::move(name), value}); }
  void warn(std::string message) { warnings.push_back(std::move(message)); }

  std::vector<double> series(const std::string& name) const {
    std::vector<double> out;
    for (const auto& s : samples)
      if (s.name == name) out.push_back(s.value);
    return out;
  }
};

/// t,name,value
inline void write_diagnostics_csv(std::ostream& os, const Diagnostics& d) {
  os << "t,name,value\n";
  os.precision(17);
  for (const auto& s : d.samples) os << s.t << ',' << s.name << ',' << s.value << '\n';
}

}  // namespace momap
