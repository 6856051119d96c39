// Copyright 2026 The CAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "cad/harness.hpp"

namespace cad::harness {

namespace {

constexpr const char* kRowHeader =
    "instance,channel,family,final_method,designated,identified,l2_error,residual_l2,"
    "residual_linf,residual_l0,iterations,stop_reason,bound_ratio,sigma_k_l1,error";

constexpr const char* kAggregateHeader =
    "family,rows,failures,identification_rate,mean_l2_error,median_l2_error,mean_bound_ratio,"
    "mean_iterations,residual_stop_rate";

// Shortest representation that parses back to the same double.
std::string num(double v) { return fmt::format("{}", v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::invalid_argument("bad number in report: '" + s + "'");
  }
  return v;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::size_t parse_size(const std::string& s) {
  return static_cast<std::size_t>(std::stoull(s));
}

// Data lines only: comments and the header are skipped.
std::vector<std::vector<std::string>> data_lines(std::istream& in, const char* header,
                                                 std::size_t width) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != header) {
        throw std::invalid_argument("unexpected report header: " + line);
      }
      seen_header = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != width) {
      throw std::invalid_argument("report row has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(width));
    }
    out.push_back(std::move(fields));
  }
  return out;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::vector<AggregateRow> compute_aggregates(const std::vector<ReportRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ReportRow*>> by_family;
  for (const auto& r : rows) {
    if (!by_family.contains(r.family)) order.push_back(r.family);
    by_family[r.family].push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& family : order) {
    AggregateRow a;
    a.family = family;
    std::vector<double> errors, ratios, iterations;
    std::size_t applicable = 0, identified = 0, residual_stops = 0;
    for (const ReportRow* r : by_family[family]) {
      ++a.rows;
      if (!r->error.empty()) {
        ++a.failures;
        continue;
      }
      errors.push_back(r->l2_error);
      iterations.push_back(static_cast<double>(r->iterations));
      if (r->bound_ratio) ratios.push_back(*r->bound_ratio);
      if (r->identified >= 0) {
        ++applicable;
        identified += static_cast<std::size_t>(r->identified);
      }
      if (r->stop_reason == "residual") ++residual_stops;
    }
    if (applicable > 0) {
      a.identification_rate = static_cast<double>(identified) / static_cast<double>(applicable);
    }
    a.mean_l2_error = mean_of(errors);
    a.median_l2_error = median_of(errors);
    if (!ratios.empty()) a.mean_bound_ratio = mean_of(ratios);
    a.mean_iterations = mean_of(iterations);
    const std::size_t ok = a.rows - a.failures;
    a.residual_stop_rate = ok > 0 ? static_cast<double>(residual_stops) / static_cast<double>(ok) : 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

void write_rows_csv(std::ostream& out, const RunReport& report) {
  const auto& p = report.params;
  if (!p.is_null()) {
    out << "# params:";
    for (const char* key : {"k", "alpha", "beta", "m", "tau", "theta", "gamma", "sigma", "lambda",
                            "eta", "eta_prime", "eta_dprime", "Delta", "delta", "T"}) {
      if (!p.contains(key)) continue;
      const auto& v = p.at(key);
      out << ' ' << key << '=' << (v.is_number_float() ? num(v.get<double>()) : v.dump());
    }
    out << '\n';
  }
  out << kRowHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.instance << ',' << r.channel << ',' << r.family << ',' << r.final_method << ','
        << r.designated << ',' << (r.identified < 0 ? "na" : std::to_string(r.identified)) << ','
        << num(r.l2_error) << ',' << num(r.residual_l2) << ',' << num(r.residual_linf) << ','
        << r.residual_l0 << ',' << r.iterations << ',' << r.stop_reason << ','
        << opt_num(r.bound_ratio) << ',' << num(r.sigma_k_l1) << ',' << sanitize(r.error) << '\n';
  }
}

std::vector<ReportRow> read_rows_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  for (const auto& f : data_lines(in, kRowHeader, 15)) {
    ReportRow r;
    r.instance = parse_size(f[0]);
    r.channel = parse_size(f[1]);
    r.family = f[2];
    r.final_method = f[3];
    r.designated = f[4];
    r.identified = f[5] == "na" ? -1 : std::stoi(f[5]);
    r.l2_error = parse_double(f[6]);
    r.residual_l2 = parse_double(f[7]);
    r.residual_linf = parse_double(f[8]);
    r.residual_l0 = parse_size(f[9]);
    r.iterations = parse_size(f[10]);
    r.stop_reason = f[11];
    r.bound_ratio = parse_opt(f[12]);
    r.sigma_k_l1 = parse_double(f[13]);
    r.error = f[14];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& aggregates) {
  out << kAggregateHeader << '\n';
  for (const auto& a : aggregates) {
    out << a.family << ',' << a.rows << ',' << a.failures << ',' << opt_num(a.identification_rate)
        << ',' << num(a.mean_l2_error) << ',' << num(a.median_l2_error) << ','
        << opt_num(a.mean_bound_ratio) << ',' << num(a.mean_iterations) << ','
        << num(a.residual_stop_rate) << '\n';
  }
}

std::vector<AggregateRow> read_aggregates_csv(std::istream& in) {
  std::vector<AggregateRow> out;
  for (const auto& f : data_lines(in, kAggregateHeader, 9)) {
    AggregateRow a;
    a.family = f[0];
    a.rows = parse_size(f[1]);
    a.failures = parse_size(f[2]);
    a.identification_rate = parse_opt(f[3]);
    a.mean_l2_error = parse_double(f[4]);
    a.median_l2_error = parse_double(f[5]);
    a.mean_bound_ratio = parse_opt(f[6]);
    a.mean_iterations = parse_double(f[7]);
    a.residual_stop_rate = parse_double(f[8]);
    out.push_back(std::move(a));
  }
  return out;
}

nlohmann::json to_json(const RunReport& report) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({
        {"instance", r.instance},
        {"channel", r.channel},
        {"family", r.family},
        {"final_method", r.final_method},
        {"designated", r.designated},
        {"identified", r.identified < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.identified)},
        {"l2_error", r.l2_error},
        {"residual_l2", r.residual_l2},
        {"residual_linf", r.residual_linf},
        {"residual_l0", r.residual_l0},
        {"iterations", r.iterations},
        {"stop_reason", r.stop_reason},
        {"bound_ratio", opt(r.bound_ratio)},
        {"sigma_k_l1", r.sigma_k_l1},
        {"error", r.error},
    });
  }
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggregates.push_back({
        {"family", a.family},
        {"rows", a.rows},
        {"failures", a.failures},
        {"identification_rate", opt(a.identification_rate)},
        {"mean_l2_error", a.mean_l2_error},
        {"median_l2_error", a.median_l2_error},
        {"mean_bound_ratio", opt(a.mean_bound_ratio)},
        {"mean_iterations", a.mean_iterations},
        {"residual_stop_rate", a.residual_stop_rate},
    });
  }
  return {{"params", report.params}, {"rows", std::move(rows)}, {"aggregates", std::move(aggregates)}};
}

}  // namespace cad::harness
