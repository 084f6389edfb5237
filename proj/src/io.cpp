#include "nlse/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace nlse {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_real(const std::string& text) {
  const std::string s = strip(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error("not a number: '" + text + "'");
  return v;
}

std::string to_csv_string(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_real(row[i]);
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error("csv: missing header");
  for (auto& h : split(line, ',')) t.header.push_back(strip(h));
  while (std::getline(ss, line)) {
    if (strip(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size()) throw std::runtime_error("csv: row width does not match header");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_real(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file(path, to_csv_string(table)); }

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

void write_dataset(const std::filesystem::path& path, std::span<const FieldSample<double>> samples,
                   const DatasetMeta& meta) {
  CsvTable t{{"x", "t", "u", "v"}, {}};
  t.rows.reserve(samples.size());
  for (const auto& s : samples) t.rows.push_back({s.x, s.t, s.u, s.v});
  write_csv(path, t);
  std::ostringstream m;
  m << "beta_true=" << format_real(meta.beta_true) << '\n'
    << "noise_level=" << format_real(meta.noise_level) << '\n'
    << "seed=" << meta.seed << '\n'
    << "count=" << meta.count << '\n';
  write_file(path.string() + ".meta", m.str());
}

std::vector<FieldSample<double>> read_dataset(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"x", "t", "u", "v"}) throw std::runtime_error("dataset: expected header x,t,u,v");
  std::vector<FieldSample<double>> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back({r[0], r[1], r[2], r[3]});
  return out;
}

DatasetMeta read_dataset_meta(const std::filesystem::path& path) {
  std::istringstream ss(read_file(path.string() + ".meta"));
  DatasetMeta meta;
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (key == "beta_true") meta.beta_true = parse_real(val);
    else if (key == "noise_level") meta.noise_level = parse_real(val);
    else if (key == "seed") meta.seed = std::stoull(val);
    else if (key == "count") meta.count = std::stoull(val);
  }
  return meta;
}

HistoryWriter::HistoryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << "epoch,beta,data_loss,physics_loss,total_loss\n";
}

void HistoryWriter::append(long epoch, double beta, const LossBreakdown<double>& loss) {
  out_ << epoch << ',' << format_real(beta) << ',' << format_real(loss.data_loss) << ','
       << format_real(loss.physics_loss) << ',' << format_real(loss.total) << '\n';
}

CsvTable history_table(const RunResult& result) {
  CsvTable t{{"epoch", "beta", "data_loss", "physics_loss", "total_loss"}, {}};
  for (std::size_t i = 0; i < result.beta_history.size(); ++i) {
    const auto& l = result.loss_history[i];
    t.rows.push_back({static_cast<double>(i + 1), result.beta_history[i], l.data_loss, l.physics_loss, l.total});
  }
  return t;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams<double>& params, const CheckpointInfo& info) {
  std::ostringstream out;
  out << "nlse-pinn-checkpoint 1\n";
  out << "topology";
  for (auto n : params.topology()) out << ' ' << n;
  out << '\n';
  out << "seed " << info.seed << '\n';
  out << "beta_true " << format_real(info.beta_true) << '\n';
  out << "noise_level " << format_real(info.noise_level) << '\n';
  out << "epoch " << info.epoch << '\n';
  const VectorX<double> flat = params.flatten();
  out << "values " << flat.size() << '\n';
  for (Index i = 0; i < flat.size(); ++i) out << format_real(flat[i]) << '\n';
  write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "nlse-pinn-checkpoint 1") {
    throw std::runtime_error("checkpoint: bad magic line in " + path.string());
  }
  Checkpoint ck;
  Topology topology;
  Index count = -1;
  while (count < 0 && std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "topology") {
      Index n;
      while (ls >> n) topology.push_back(n);
    } else if (key == "seed") {
      ls >> ck.info.seed;
    } else if (key == "beta_true") {
      std::string v;
      ls >> v;
      ck.info.beta_true = parse_real(v);
    } else if (key == "noise_level") {
      std::string v;
      ls >> v;
      ck.info.noise_level = parse_real(v);
    } else if (key == "epoch") {
      ls >> ck.info.epoch;
    } else if (key == "values") {
      ls >> count;
    } else {
      throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
    }
  }
  ck.params = MlpParams<double>::zeros(topology);
  if (count != ck.params.layout().size()) throw std::runtime_error("checkpoint: value count does not match topology");
  VectorX<double> flat(count);
  for (Index i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated value list");
    flat[i] = parse_real(line);
  }
  ck.params.assign_flat(flat);
  return ck;
}

}  // namespace nlse
