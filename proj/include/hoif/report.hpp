#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hoif {

// Fixed-format float printing: shortest-round-trip is locale dependent across
// platforms, so reports always use 17 significant digits.
std::string format_double(double v);

// RFC-style CSV quoting: fields containing commas, quotes, or newlines are
// wrapped and inner quotes doubled. Lines end with '\n'.
std::string csv_escape(const std::string& field);
std::string csv_row(const std::vector<std::string>& fields);

void write_text_file(const std::string& path, const std::string& contents);

// Debug export of whitened design rows: one line per estimation-sample
// observation, columns "sample,z_1,...,z_k".
struct DesignMatrix;
std::string design_matrix_csv(const DesignMatrix& dm);

// Minimal ordered JSON value for byte-stable report emission: insertion order
// is preserved and every number prints through format_double.
class JsonValue {
public:
  JsonValue() : kind_(Kind::null) {}
  static JsonValue object() {
    JsonValue v;
    v.kind_ = Kind::object;
    return v;
  }
  static JsonValue array() {
    JsonValue v;
    v.kind_ = Kind::array;
    return v;
  }
  static JsonValue number(double x) {
    JsonValue v;
    v.kind_ = Kind::number;
    v.num_ = x;
    return v;
  }
  static JsonValue integer(long long x) {
    JsonValue v;
    v.kind_ = Kind::integer;
    v.int_ = x;
    return v;
  }
  static JsonValue boolean(bool b) {
    JsonValue v;
    v.kind_ = Kind::boolean;
    v.bool_ = b;
    return v;
  }
  static JsonValue string(std::string s) {
    JsonValue v;
    v.kind_ = Kind::string;
    v.str_ = std::move(s);
    return v;
  }

  JsonValue& set(const std::string& key, JsonValue v);
  JsonValue& push(JsonValue v);
  std::string dump(int indent = 2) const;

private:
  enum class Kind { null, object, array, number, integer, boolean, string };
  void emit(std::string& out, int indent, int depth) const;

  Kind kind_;
  double num_ = 0.0;
  long long int_ = 0;
  bool bool_ = false;
  std::string str_;
  std::vector<std::pair<std::string, JsonValue>> members_;
  std::vector<JsonValue> items_;
};

}  // namespace hoif
