#include "hoif/report.hpp"

#include "hoif/design.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hoif {

std::string format_double(double v) {
  if (std::isnan(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string csv_escape(const std::string& field) {
  bool needs = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs = true;
      break;
    }
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << contents;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string design_matrix_csv(const DesignMatrix& dm) {
  std::vector<std::string> header = {"sample"};
  for (Eigen::Index c = 0; c < dm.k(); ++c) header.push_back("z_" + std::to_string(c + 1));
  std::string out = csv_row(header);
  for (Eigen::Index r = 0; r < dm.n(); ++r) {
    std::vector<std::string> row = {std::to_string(r)};
    for (Eigen::Index c = 0; c < dm.k(); ++c) row.push_back(format_double(dm.rows(r, c)));
    out += csv_row(row);
  }
  return out;
}

JsonValue& JsonValue::set(const std::string& key, JsonValue v) {
  if (kind_ != Kind::object) throw std::logic_error("JsonValue: set on a non-object");
  members_.emplace_back(key, std::move(v));
  return *this;
}

JsonValue& JsonValue::push(JsonValue v) {
  if (kind_ != Kind::array) throw std::logic_error("JsonValue: push on a non-array");
  items_.push_back(std::move(v));
  return *this;
}

namespace {
void emit_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}
}  // namespace

void JsonValue::emit(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad_close(static_cast<std::size_t>(indent * depth), ' ');
  switch (kind_) {
    case Kind::null: out += "null"; break;
    case Kind::number: out += format_double(num_); break;
    case Kind::integer: out += std::to_string(int_); break;
    case Kind::boolean: out += bool_ ? "true" : "false"; break;
    case Kind::string: emit_string(out, str_); break;
    case Kind::object: {
      if (members_.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      for (std::size_t i = 0; i < members_.size(); ++i) {
        out += pad;
        emit_string(out, members_[i].first);
        out += ": ";
        members_[i].second.emit(out, indent, depth + 1);
        if (i + 1 < members_.size()) out += ',';
        out += '\n';
      }
      out += pad_close + "}";
      break;
    }
    case Kind::array: {
      if (items_.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < items_.size(); ++i) {
        out += pad;
        items_[i].emit(out, indent, depth + 1);
        if (i + 1 < items_.size()) out += ',';
        out += '\n';
      }
      out += pad_close + "]";
      break;
    }
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  emit(out, indent, 0);
  out += '\n';
  return out;
}

}  // namespace hoif
