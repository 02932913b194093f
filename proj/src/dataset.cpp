#include "neural_screen/dataset.hpp"

#include "neural_screen/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nscreen {

void Dataset::validate() const
{
  if (y.size() != X.rows())
    throw schema_error("response has " + std::to_string(y.size()) +
                       " rows, predictors have " + std::to_string(X.rows()));
  if (static_cast<Index>(column_names.size()) != X.cols())
    throw schema_error("one column name per predictor required");
  if (X.rows() < 2)
    throw insufficient_samples("dataset needs at least 2 rows");
  if (!y.allFinite() || !X.allFinite())
    throw degenerate_input("dataset contains non-finite values");
}

namespace {

// RFC 4180 fields: quotes, doubled quotes inside quotes, CRLF tolerated.
std::vector<std::vector<std::string>> split_records(const std::string& text)
{
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
        ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted)
    throw parse_error("unterminated quoted field", static_cast<long>(records.size()) + 1, 0);
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  return records;
}

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, long row, long col, const std::string& name)
{
  const std::string s = trim(raw);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw parse_error("row " + std::to_string(row) + ", column " + std::to_string(col) +
                        " (" + name + "): cannot parse '" + raw + "' as a number",
                      row,
                      col);
  return v;
}

} // namespace

Dataset parse_csv(const std::string& text, const std::string& target)
{
  const auto records = split_records(text);
  if (records.empty())
    throw schema_error("CSV has no header row");
  std::vector<std::string> header;
  for (const auto& h : records[0])
    header.push_back(trim(h));

  long target_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target) {
      target_col = static_cast<long>(c);
      break;
    }
  }
  if (target_col < 0)
    throw schema_error("target column '" + target + "' not found in header");

  Dataset out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<long>(c) != target_col)
      out.column_names.push_back(header[c]);
  }
  const Index n = static_cast<Index>(records.size()) - 1;
  const Index d = static_cast<Index>(header.size()) - 1;
  out.y.resize(n);
  out.X.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    // rows and columns are reported 1-based, the header being row 1
    const long row = static_cast<long>(i) + 2;
    if (rec.size() != header.size())
      throw parse_error("row " + std::to_string(row) + " has " + std::to_string(rec.size()) +
                          " fields, header has " + std::to_string(header.size()),
                        row,
                        0);
    Index k = 0;
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const double v = parse_cell(rec[c], row, static_cast<long>(c) + 1, header[c]);
      if (static_cast<long>(c) == target_col)
        out.y(i) = v;
      else
        out.X(i, k++) = v;
    }
  }
  out.validate();
  return out;
}

Dataset load_csv(const std::string& path, const std::string& target)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw schema_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Dataset out = parse_csv(buf.str(), target);
  out.source_path = path;
  return out;
}

namespace {

void put_number(std::string& s, double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s)
{
  if (s.find_first_of(",\"\n\r") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"')
      q += '"';
    q += c;
  }
  return q + '"';
}

} // namespace

std::string format_csv(const Dataset& data, const std::string& target)
{
  data.validate();
  std::string s = quote_if_needed(target);
  for (const auto& name : data.column_names)
    s += "," + quote_if_needed(name);
  s += '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    put_number(s, data.y(i));
    for (Index j = 0; j < data.cols(); ++j) {
      s += ',';
      put_number(s, data.X(i, j));
    }
    s += '\n';
  }
  return s;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& target)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw screen_error("cannot write '" + path + "'");
  out << format_csv(data, target);
}

} // namespace nscreen
