#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reeblab/system.hpp"

namespace reeblab {

// Minimal TOML-style document: top-level keys, [tables], [[table arrays]];
// values are strings, numbers, booleans and single-line homogeneous arrays.
struct TomlValue {
    enum Kind { Str, Num, Bool, Arr } kind = Num;
    std::string s;
    double n = 0.0;
    bool b = false;
    std::vector<TomlValue> arr;
    int line = 0, col = 0;
};

struct TomlTable {
    std::map<std::string, TomlValue> kv;
    int line = 0;
};

struct TomlDoc {
    TomlTable root;
    std::map<std::string, TomlTable> tables;
    std::map<std::string, std::vector<TomlTable>> table_arrays;
};

TomlDoc parse_toml(std::string_view text);

// Parsed but not yet compiled system definition (mirrors the file schema).
struct SystemDoc {
    std::string name;
    struct CoordDoc {
        std::string name;
        bool periodic = false;
        double period = 0.0;
    };
    std::vector<CoordDoc> coordinates;
    std::map<std::string, double> parameters;

    // [form]
    std::optional<std::string> critical;
    int m = 0;
    std::optional<std::string> u;
    std::optional<std::string> beta;
    std::optional<std::string> ambient;
    double valid_halfwidth = std::numeric_limits<double>::infinity();

    // [hamiltonian]
    std::optional<std::string> h;
    std::optional<std::string> omega;
    std::vector<std::string> liouville;
    std::optional<double> energy;

    // [witness]
    std::vector<std::string> witness;
    std::vector<std::string> witness_rate;

    // [sampling]
    std::vector<double> lo, hi;

    std::string source_text; // for hashing
};

SystemDoc parse_system_text(std::string_view toml_text);
SystemDoc parse_system_file(const std::string& path);

// Full validation: unique coordinates, resolvable expressions, decomposition
// consistency when both routes are present.  Throws SchemaError,
// ValidationError, ParseError or CriticalMismatchError with a field path.
SystemSpec compile_system(const SystemDoc& doc);

// Convenience: parse + compile.
SystemSpec load_system_file(const std::string& path);

// (Re)binds the generic box + Newton-projection samplers.  Call again after
// adjusting the sampling box or the accept predicate.
void install_default_samplers(SystemSpec& sys);

// Building blocks shared with the gallery.
ScalarField compile_scalar(const std::string& text, const Bindings& b, const std::string& path);
OneFormField compile_oneform(const std::string& text, const Bindings& b, const Ast* crit,
                             int expected_m, int sing_axis, const std::string& path);
TwoFormField compile_twoform(const std::string& text, const Bindings& b, const std::string& path);

} // namespace reeblab
