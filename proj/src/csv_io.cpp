#include "tspipe/csv_io.hpp"

#include "tspipe/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <set>
#include <unordered_map>

namespace tspipe {

namespace {

bool has_gz_suffix(const std::filesystem::path& p) { return p.extension() == ".gz"; }

struct EavCell {
  double time;
  Index variable;
  double value;
};

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  // gzread passes uncompressed input through unchanged.
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw LoadError("cannot open " + path.string());
  std::string out;
  std::array<char, 1 << 16> buf{};
  int got = 0;
  while ((got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.append(buf.data(), static_cast<std::size_t>(got));
  }
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw LoadError("cannot decompress " + path.string());
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (has_gz_suffix(path)) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) throw Error("cannot write " + path.string());
    const int wrote = text.empty() ? 0 : gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (wrote != static_cast<int>(text.size())) throw Error("short write to " + path.string());
    return;
  }
  FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw Error("cannot write " + path.string());
  const auto wrote = std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
  if (wrote != text.size()) throw Error("short write to " + path.string());
}

std::vector<CsvRecord> parse_csv(const std::string& text) {
  std::vector<CsvRecord> rows;
  CsvRecord row;
  std::string field;
  std::size_t line = 1;
  row.line = 1;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.fields.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.fields.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row = CsvRecord{};
        row_has_content = false;
        ++line;
        row.line = line;
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (in_quotes) throw LoadError("unterminated quoted field starting on line " + std::to_string(row.line));
  if (row_has_content || !field.empty()) {
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

bool parse_number(const std::string& s, double& out) {
  std::size_t b = 0, e = s.size();
  while (b < e && s[b] == ' ') ++b;
  while (e > b && s[e - 1] == ' ') --e;
  if (b == e) return false;
  if (s[b] == '+') ++b;
  const auto res = std::from_chars(s.data() + b, s.data() + e, out);
  return res.ec == std::errc() && res.ptr == s.data() + e;
}

Dataset load_csv(const std::filesystem::path& static_path, const std::filesystem::path& temporal_path) {
  Dataset ds;

  // Static: wide layout.
  const auto srows = parse_csv(read_text_file(static_path));
  if (srows.empty()) throw LoadError(static_path.string() + ": empty file");
  const auto& sheader = srows.front().fields;
  if (sheader.empty() || sheader.front() != "id") {
    throw LoadError(static_path.string() + ": header must start with 'id'");
  }
  ds.static_names.assign(sheader.begin() + 1, sheader.end());
  const auto n_static = static_cast<Index>(ds.static_names.size());
  const auto n = static_cast<Index>(srows.size() - 1);
  std::unordered_map<std::string, Index> id_index;
  std::vector<std::vector<std::string>> cells(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& rec = srows[static_cast<std::size_t>(i + 1)];
    if (static_cast<Index>(rec.fields.size()) != n_static + 1) {
      throw LoadError(static_path.string() + ": line " + std::to_string(rec.line) + ": expected " +
                      std::to_string(n_static + 1) + " columns, got " + std::to_string(rec.fields.size()));
    }
    if (!id_index.emplace(rec.fields[0], i).second) {
      throw LoadError(static_path.string() + ": line " + std::to_string(rec.line) + ": duplicate id '" +
                      rec.fields[0] + "'");
    }
    ds.ids.push_back(rec.fields[0]);
    cells[static_cast<std::size_t>(i)] = rec.fields;
  }
  ds.static_features.values = Matrix::Constant(n, n_static, kMissing);
  ds.static_features.observed = Mask::Constant(n, n_static, false);
  ds.static_features.levels.assign(static_cast<std::size_t>(n_static), {});
  for (Index j = 0; j < n_static; ++j) {
    bool numeric = true;
    for (Index i = 0; i < n && numeric; ++i) {
      const auto& s = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
      double v = 0.0;
      if (!s.empty() && !parse_number(s, v)) numeric = false;
    }
    auto& levels = ds.static_features.levels[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      const auto& s = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
      if (s.empty()) continue;
      double v = 0.0;
      if (numeric) {
        parse_number(s, v);
      } else {
        const auto it = std::find(levels.begin(), levels.end(), s);
        v = static_cast<double>(it - levels.begin());
        if (it == levels.end()) levels.push_back(s);
      }
      ds.static_features.values(i, j) = v;
      ds.static_features.observed(i, j) = true;
    }
  }

  // Temporal: EAV layout.
  const auto trows = parse_csv(read_text_file(temporal_path));
  const auto tname = temporal_path.string();
  if (trows.empty()) throw LoadError(tname + ": empty file");
  const CsvRow expected{"id", "time", "variable", "value"};
  if (trows.front().fields != expected) throw LoadError(tname + ": header must be exactly id,time,variable,value");
  std::vector<std::vector<EavCell>> per_instance(static_cast<std::size_t>(n));
  std::unordered_map<std::string, Index> var_index;
  std::set<std::tuple<Index, double, Index>> seen;
  for (std::size_t r = 1; r < trows.size(); ++r) {
    const auto& rec = trows[r];
    const auto where = tname + ": line " + std::to_string(rec.line) + ": ";
    if (rec.fields.size() != 4) {
      throw LoadError(where + "expected 4 columns, got " + std::to_string(rec.fields.size()));
    }
    const auto id_it = id_index.find(rec.fields[0]);
    if (id_it == id_index.end()) throw LoadError(where + "id '" + rec.fields[0] + "' not in static file");
    double t = 0.0, v = 0.0;
    if (!parse_number(rec.fields[1], t)) throw LoadError(where + "unparsable time '" + rec.fields[1] + "'");
    if (!parse_number(rec.fields[3], v)) throw LoadError(where + "unparsable value '" + rec.fields[3] + "'");
    auto [vit, inserted] = var_index.emplace(rec.fields[2], static_cast<Index>(var_index.size()));
    if (inserted) ds.temporal_names.push_back(rec.fields[2]);
    if (!seen.emplace(id_it->second, t, vit->second).second) {
      throw LoadError(where + "duplicate entry (" + rec.fields[0] + ", " + rec.fields[1] + ", " + rec.fields[2] +
                      ")");
    }
    per_instance[static_cast<std::size_t>(id_it->second)].push_back({t, vit->second, v});
  }

  const auto d = static_cast<Index>(ds.temporal_names.size());
  std::vector<std::vector<double>> grids(static_cast<std::size_t>(n));
  Index max_steps = 0;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    for (const auto& c : per_instance[i]) grids[i].push_back(c.time);
    std::sort(grids[i].begin(), grids[i].end());
    grids[i].erase(std::unique(grids[i].begin(), grids[i].end()), grids[i].end());
    max_steps = std::max(max_steps, static_cast<Index>(grids[i].size()));
  }
  ds.temporal = TemporalTensor::empty(n, max_steps, d);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto ii = static_cast<Index>(i);
    const auto& grid = grids[i];
    ds.temporal.seq_len(ii) = static_cast<int>(grid.size());
    for (std::size_t s = 0; s < grid.size(); ++s) ds.temporal.time(ii, static_cast<Index>(s)) = grid[s];
    for (const auto& c : per_instance[i]) {
      const auto step = static_cast<Index>(std::lower_bound(grid.begin(), grid.end(), c.time) - grid.begin());
      ds.temporal.values[i](step, c.variable) = c.value;
      ds.temporal.observed[i](step, c.variable) = true;
    }
  }
  ds.fold.assign(static_cast<std::size_t>(n), Fold::Unassigned);
  ds.check_consistency();
  return ds;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& static_path,
               const std::filesystem::path& temporal_path) {
  std::string s = "id";
  for (const auto& name : dataset.static_names) s += "," + csv_escape(name);
  s += '\n';
  const auto& st = dataset.static_features;
  for (Index i = 0; i < dataset.instances(); ++i) {
    s += csv_escape(dataset.ids[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < st.values.cols(); ++j) {
      s += ',';
      if (!st.observed(i, j)) continue;
      if (st.categorical(j)) {
        s += csv_escape(st.levels[static_cast<std::size_t>(j)][static_cast<std::size_t>(st.values(i, j))]);
      } else {
        s += format_number(st.values(i, j));
      }
    }
    s += '\n';
  }
  write_text_file(static_path, s);

  // Feature-major order so that first appearance reproduces the feature order.
  std::string t = "id,time,variable,value\n";
  const auto& tt = dataset.temporal;
  for (Index f = 0; f < tt.features(); ++f) {
    const auto name = csv_escape(dataset.temporal_names[static_cast<std::size_t>(f)]);
    for (Index i = 0; i < tt.instances(); ++i) {
      const auto si = static_cast<std::size_t>(i);
      for (Index step = 0; step < tt.seq_len(i); ++step) {
        if (!tt.observed[si](step, f)) continue;
        t += csv_escape(dataset.ids[si]) + ',' + format_number(tt.time(i, step)) + ',' + name + ',' +
             format_number(tt.values[si](step, f)) + '\n';
      }
    }
  }
  write_text_file(temporal_path, t);
}

}  // namespace tspipe
