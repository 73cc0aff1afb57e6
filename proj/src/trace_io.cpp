#include "ipddp/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ipddp {

namespace {

using nlohmann::json;

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& field) {
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::runtime_error("malformed number '" + field + "' in trace file");
  }
  return value;
}

json to_json(const std::vector<Vector>& vs) {
  json arr = json::array();
  for (const Vector& v : vs) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return arr;
}

std::vector<Vector> vectors_from_json(const json& arr) {
  std::vector<Vector> out;
  for (const json& row : arr) {
    const auto values = row.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_trace_csv(std::ostream& out, std::span<const IterationRecord> trace) {
  out << kTraceHeader << '\n';
  for (const IterationRecord& r : trace) {
    out << r.iteration << ',' << format_number(r.objective) << ','
        << (r.optimality_error ? format_number(*r.optimality_error) : "") << ',' << format_number(r.mu) << ','
        << format_number(r.F_inf) << ',' << format_number(r.step) << ',' << format_number(r.gamma_reg) << ','
        << (r.min_eig ? format_number(*r.min_eig) : "") << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, std::span<const IterationRecord> trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  write_file_atomic(path, out.str());
}

std::vector<IterationRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error(path.string() + " is not a trace file");
  }
  std::vector<IterationRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 8) throw std::runtime_error("trace row has " + std::to_string(fields.size()) + " columns");
    IterationRecord r;
    r.iteration = static_cast<int>(parse_number(fields[0]));
    r.objective = parse_number(fields[1]);
    if (!fields[2].empty()) r.optimality_error = parse_number(fields[2]);
    r.mu = parse_number(fields[3]);
    r.F_inf = parse_number(fields[4]);
    r.step = parse_number(fields[5]);
    r.gamma_reg = parse_number(fields[6]);
    if (!fields[7].empty()) r.min_eig = parse_number(fields[7]);
    records.push_back(r);
  }
  return records;
}

void write_summary_json(const std::filesystem::path& path, const TrialSpec& spec,
                        std::span<const TrialResult> results) {
  json doc;
  doc["problem"] = to_string(spec.problem);
  doc["algorithm"] = to_string(spec.algorithm);
  doc["trials"] = spec.trials;
  doc["base_seed"] = spec.base_seed;
  doc["control_range"] = {spec.control_low, spec.control_high};
  doc["success_threshold"] = spec.success_threshold;
  if (auto ref = reference_optimum(spec.problem)) doc["J_star"] = ref->J_star;
  else if (spec.config.reference_objective) doc["J_star"] = *spec.config.reference_objective;

  int successes = 0;
  json records = json::array();
  for (const TrialResult& r : results) {
    successes += r.success ? 1 : 0;
    json t;
    t["trial"] = r.trial;
    t["seed"] = r.seed;
    t["status"] = r.status;
    if (!r.error.empty()) t["error"] = r.error;
    t["iterations"] = r.iterations;
    t["final_J"] = r.final_objective;
    t["final_E_J"] = optional_number(r.final_optimality_error);
    t["iterations_to_threshold"] = r.iterations_to_threshold ? json(*r.iterations_to_threshold) : json(nullptr);
    t["final_mu"] = r.final_mu;
    t["final_F_inf"] = r.final_F_inf;
    t["max_constraint_violation"] = r.max_constraint_violation;
    t["success"] = r.success;
    records.push_back(std::move(t));
  }
  doc["successes"] = successes;
  doc["results"] = std::move(records);
  write_file_atomic(path, doc.dump(2) + "\n");
}

void write_solution_json(const std::filesystem::path& path, const std::string& problem, const std::string& algorithm,
                         const Solution& solution) {
  json doc;
  doc["problem"] = problem;
  doc["algorithm"] = algorithm;
  doc["status"] = to_string(solution.status);
  doc["mu"] = solution.mu;
  doc["objective"] = solution.objective;
  doc["F_inf"] = solution.F_inf;
  doc["iterations"] = solution.iterations;
  doc["x"] = to_json(solution.iterate.x);
  doc["u"] = to_json(solution.iterate.u);
  doc["s"] = to_json(solution.iterate.s);
  doc["y"] = to_json(solution.iterate.y);
  doc["lambda"] = to_json(solution.multipliers.lambda);
  write_file_atomic(path, doc.dump(1) + "\n");
}

StoredSolution read_solution_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const json doc = json::parse(in);
  StoredSolution s;
  s.problem = doc.at("problem").get<std::string>();
  s.algorithm = doc.at("algorithm").get<std::string>();
  s.mu = doc.at("mu").get<double>();
  s.iterate.x = vectors_from_json(doc.at("x"));
  s.iterate.u = vectors_from_json(doc.at("u"));
  s.iterate.s = vectors_from_json(doc.at("s"));
  s.iterate.y = vectors_from_json(doc.at("y"));
  s.multipliers.lambda = vectors_from_json(doc.at("lambda"));
  return s;
}

}  // namespace ipddp
