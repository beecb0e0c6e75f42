#include "reeblab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "reeblab/errors.hpp"

namespace reeblab {

namespace {

struct TomlCursor {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1, col = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void bump() {
        if (text[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_ws_inline() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) bump();
    }

    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') bump();
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col); }
};

bool key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string parse_key(TomlCursor& c) {
    c.skip_ws_inline();
    std::string k;
    while (!c.eof() && key_char(c.peek())) {
        k += c.peek();
        c.bump();
    }
    if (k.empty()) c.fail("expected key");
    return k;
}

TomlValue parse_value(TomlCursor& c);

TomlValue parse_array(TomlCursor& c) {
    TomlValue v;
    v.kind = TomlValue::Arr;
    v.line = c.line;
    v.col = c.col;
    c.bump(); // [
    c.skip_ws_inline();
    if (!c.eof() && c.peek() == ']') {
        c.bump();
        return v;
    }
    while (true) {
        v.arr.push_back(parse_value(c));
        c.skip_ws_inline();
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ',') {
            c.bump();
            c.skip_ws_inline();
            continue;
        }
        if (c.peek() == ']') {
            c.bump();
            return v;
        }
        c.fail("expected ',' or ']' in array");
    }
}

TomlValue parse_value(TomlCursor& c) {
    c.skip_ws_inline();
    if (c.eof()) c.fail("expected value");
    TomlValue v;
    v.line = c.line;
    v.col = c.col;
    const char ch = c.peek();
    if (ch == '"') {
        v.kind = TomlValue::Str;
        c.bump();
        while (!c.eof() && c.peek() != '"') {
            if (c.peek() == '\\' && c.pos + 1 < c.text.size()) {
                c.bump();
                const char esc = c.peek();
                if (esc == 'n') v.s += '\n';
                else if (esc == 't') v.s += '\t';
                else v.s += esc;
                c.bump();
                continue;
            }
            if (c.peek() == '\n') c.fail("unterminated string");
            v.s += c.peek();
            c.bump();
        }
        if (c.eof()) c.fail("unterminated string");
        c.bump();
        return v;
    }
    if (ch == '[') return parse_array(c);
    if (std::isalpha(static_cast<unsigned char>(ch))) {
        std::string word;
        while (!c.eof() && std::isalpha(static_cast<unsigned char>(c.peek()))) {
            word += c.peek();
            c.bump();
        }
        if (word == "true") {
            v.kind = TomlValue::Bool;
            v.b = true;
            return v;
        }
        if (word == "false") {
            v.kind = TomlValue::Bool;
            v.b = false;
            return v;
        }
        c.fail("unexpected bare word '" + word + "'");
    }
    // number
    {
        std::string num;
        while (!c.eof() && (std::isdigit(static_cast<unsigned char>(c.peek())) || c.peek() == '+' ||
                            c.peek() == '-' || c.peek() == '.' || c.peek() == 'e' || c.peek() == 'E'))
        {
            num += c.peek();
            c.bump();
        }
        if (num.empty()) c.fail("expected value");
        char* end = nullptr;
        v.kind = TomlValue::Num;
        v.n = std::strtod(num.c_str(), &end);
        if (end != num.c_str() + num.size()) c.fail("malformed number '" + num + "'");
        return v;
    }
}

} // namespace

TomlDoc parse_toml(std::string_view text) {
    TomlDoc doc;
    TomlCursor c{text};
    TomlTable* current = &doc.root;
    while (!c.eof()) {
        c.skip_ws_inline();
        c.skip_comment();
        if (c.eof()) break;
        if (c.peek() == '\n') {
            c.bump();
            continue;
        }
        if (c.peek() == '[') {
            c.bump();
            const bool is_array = !c.eof() && c.peek() == '[';
            if (is_array) c.bump();
            std::string name = parse_key(c);
            c.skip_ws_inline();
            if (c.eof() || c.peek() != ']') c.fail("expected ']'");
            c.bump();
            if (is_array) {
                if (c.eof() || c.peek() != ']') c.fail("expected ']]'");
                c.bump();
                doc.table_arrays[name].push_back(TomlTable{{}, c.line});
                current = &doc.table_arrays[name].back();
            } else {
                auto [it, fresh] = doc.tables.try_emplace(name);
                if (!fresh) c.fail("duplicate table [" + name + "]");
                it->second.line = c.line;
                current = &it->second;
            }
            c.skip_ws_inline();
            c.skip_comment();
            if (!c.eof() && c.peek() != '\n') c.fail("trailing characters after table header");
            continue;
        }
        const int kline = c.line, kcol = c.col;
        std::string key = parse_key(c);
        c.skip_ws_inline();
        if (c.eof() || c.peek() != '=') throw ParseError("expected '=' after key '" + key + "'", kline, kcol);
        c.bump();
        TomlValue val = parse_value(c);
        c.skip_ws_inline();
        c.skip_comment();
        if (!c.eof() && c.peek() != '\n') c.fail("trailing characters after value");
        if (current->kv.count(key)) throw ParseError("duplicate key '" + key + "'", kline, kcol);
        current->kv.emplace(std::move(key), std::move(val));
    }
    return doc;
}

namespace {

const TomlValue& require(const TomlTable& t, const std::string& key, const std::string& path) {
    auto it = t.kv.find(key);
    if (it == t.kv.end()) throw SchemaError("missing required key", path + "." + key);
    return it->second;
}

std::string require_str(const TomlTable& t, const std::string& key, const std::string& path) {
    const TomlValue& v = require(t, key, path);
    if (v.kind != TomlValue::Str) throw SchemaError("expected a string", path + "." + key);
    return v.s;
}

double require_num(const TomlTable& t, const std::string& key, const std::string& path) {
    const TomlValue& v = require(t, key, path);
    if (v.kind != TomlValue::Num) throw SchemaError("expected a number", path + "." + key);
    return v.n;
}

std::optional<std::string> opt_str(const TomlTable& t, const std::string& key,
                                   const std::string& path) {
    auto it = t.kv.find(key);
    if (it == t.kv.end()) return std::nullopt;
    if (it->second.kind != TomlValue::Str) throw SchemaError("expected a string", path + "." + key);
    return it->second.s;
}

std::vector<std::string> opt_str_array(const TomlTable& t, const std::string& key,
                                       const std::string& path) {
    std::vector<std::string> out;
    auto it = t.kv.find(key);
    if (it == t.kv.end()) return out;
    if (it->second.kind != TomlValue::Arr) throw SchemaError("expected an array", path + "." + key);
    for (const TomlValue& v : it->second.arr) {
        if (v.kind != TomlValue::Str) throw SchemaError("expected strings", path + "." + key);
        out.push_back(v.s);
    }
    return out;
}

std::vector<double> opt_num_array(const TomlTable& t, const std::string& key,
                                  const std::string& path) {
    std::vector<double> out;
    auto it = t.kv.find(key);
    if (it == t.kv.end()) return out;
    if (it->second.kind != TomlValue::Arr) throw SchemaError("expected an array", path + "." + key);
    for (const TomlValue& v : it->second.arr) {
        if (v.kind != TomlValue::Num) throw SchemaError("expected numbers", path + "." + key);
        out.push_back(v.n);
    }
    return out;
}

} // namespace

SystemDoc parse_system_text(std::string_view toml_text) {
    TomlDoc t = parse_toml(toml_text);
    SystemDoc doc;
    doc.source_text = std::string(toml_text);

    const double version = require_num(t.root, "spec_version", "");
    if (version != 1.0) throw SchemaError("unsupported spec_version (want 1)", ".spec_version");
    doc.name = require_str(t.root, "name", "");

    auto coords_it = t.table_arrays.find("coordinates");
    if (coords_it == t.table_arrays.end())
        throw SchemaError("missing required key", ".coordinates");
    for (std::size_t i = 0; i < coords_it->second.size(); ++i) {
        const TomlTable& ct = coords_it->second[i];
        const std::string path = "coordinates[" + std::to_string(i) + "]";
        SystemDoc::CoordDoc cd;
        cd.name = require_str(ct, "name", path);
        auto pit = ct.kv.find("periodic");
        if (pit != ct.kv.end()) {
            if (pit->second.kind != TomlValue::Bool)
                throw SchemaError("expected a boolean", path + ".periodic");
            cd.periodic = pit->second.b;
        }
        if (cd.periodic) cd.period = require_num(ct, "period", path);
        doc.coordinates.push_back(std::move(cd));
    }

    if (auto it = t.tables.find("parameters"); it != t.tables.end()) {
        for (const auto& [k, v] : it->second.kv) {
            if (v.kind != TomlValue::Num) throw SchemaError("expected a number", "parameters." + k);
            doc.parameters[k] = v.n;
        }
    }

    if (auto it = t.tables.find("form"); it != t.tables.end()) {
        const TomlTable& f = it->second;
        doc.critical = opt_str(f, "critical", "form");
        if (auto m = f.kv.find("m"); m != f.kv.end()) {
            if (m->second.kind != TomlValue::Num || m->second.n != std::floor(m->second.n) ||
                m->second.n < 1)
                throw SchemaError("m must be an integer >= 1", "form.m");
            doc.m = static_cast<int>(m->second.n);
        }
        doc.u = opt_str(f, "u", "form");
        doc.beta = opt_str(f, "beta", "form");
        doc.ambient = opt_str(f, "ambient", "form");
        if (auto vh = f.kv.find("valid_halfwidth"); vh != f.kv.end()) {
            if (vh->second.kind != TomlValue::Num)
                throw SchemaError("expected a number", "form.valid_halfwidth");
            doc.valid_halfwidth = vh->second.n;
        }
    }

    if (auto it = t.tables.find("hamiltonian"); it != t.tables.end()) {
        const TomlTable& h = it->second;
        doc.h = opt_str(h, "h", "hamiltonian");
        doc.omega = opt_str(h, "omega", "hamiltonian");
        doc.liouville = opt_str_array(h, "liouville", "hamiltonian");
        if (auto e = h.kv.find("energy"); e != h.kv.end()) {
            if (e->second.kind != TomlValue::Num)
                throw SchemaError("expected a number", "hamiltonian.energy");
            doc.energy = e->second.n;
        }
    }

    if (auto it = t.tables.find("witness"); it != t.tables.end()) {
        doc.witness = opt_str_array(it->second, "fields", "witness");
        doc.witness_rate = opt_str_array(it->second, "rates", "witness");
    }

    if (auto it = t.tables.find("sampling"); it != t.tables.end()) {
        doc.lo = opt_num_array(it->second, "lo", "sampling");
        doc.hi = opt_num_array(it->second, "hi", "sampling");
    }
    return doc;
}

SystemDoc parse_system_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_system_text(ss.str());
}

// --- compilation ------------------------------------------------------------

namespace {

std::shared_ptr<const Ast> parse_in(const std::string& text, const std::string& path) {
    try {
        return std::make_shared<const Ast>(parse_expr(text));
    } catch (const ParseError& e) {
        throw ParseError(std::string(e.what()) + " in " + path, e.line, e.col, e.expected);
    }
}

ScalarField field_of(std::shared_ptr<const Ast> ast, const Bindings& b, const std::string& path) {
    try {
        return BoundExpr(std::move(ast), b).field();
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), path);
    }
}

} // namespace

ScalarField compile_scalar(const std::string& text, const Bindings& b, const std::string& path) {
    return field_of(parse_in(text, path), b, path);
}

OneFormField compile_oneform(const std::string& text, const Bindings& b, const Ast* crit,
                             int expected_m, int sing_axis, const std::string& path) {
    OneFormField out;
    out.dim = static_cast<int>(b.coords.size());
    out.coef.resize(b.coords.size());

    std::vector<OneFormTerm> terms;
    try {
        terms = parse_oneform(text, crit);
    } catch (const ParseError& e) {
        throw ParseError(std::string(e.what()) + " in " + path, e.line, e.col, e.expected);
    }

    // Per-coordinate accumulation closures.
    struct Piece {
        BoundExpr coeff; // empty ast -> constant 1
        bool has_coeff = false;
        bool negated = false;
        int m = 0;
        BoundExpr denom;
    };
    std::vector<std::vector<Piece>> pieces(b.coords.size());

    for (const OneFormTerm& t : terms) {
        int ci = -1;
        for (std::size_t i = 0; i < b.coords.size(); ++i)
            if (b.coords[i] == t.coord) ci = static_cast<int>(i);
        if (ci < 0) throw ValidationError("unknown coordinate '" + t.coord + "'", path);
        if (t.m > 0) {
            if (expected_m == 0)
                throw ValidationError("singular term in a smooth one-form", path);
            if (t.m != expected_m)
                throw ValidationError("singular order " + std::to_string(t.m) +
                                          " does not match declared m = " + std::to_string(expected_m),
                                      path);
            if (ci != sing_axis)
                throw ValidationError("singular term on coordinate '" + t.coord +
                                          "' but the critical function depends on '" +
                                          b.coords[static_cast<std::size_t>(sing_axis)] + "'",
                                      path);
        }
        Piece pc;
        pc.negated = t.negated;
        pc.m = t.m;
        if (t.coeff) {
            try {
                pc.coeff = BoundExpr(t.coeff, b);
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), path);
            }
            pc.has_coeff = true;
        }
        if (t.m > 0) {
            try {
                pc.denom = BoundExpr(t.denom_base, b);
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), path);
            }
        }
        pieces[static_cast<std::size_t>(ci)].push_back(std::move(pc));
    }

    const int dim = out.dim;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i].empty()) continue;
        auto ps = pieces[i];
        out.coef[i] = [ps, dim](const Vec& p) -> Jet1 {
            Jet2 acc = Jet2::constant(0.0, dim);
            for (const auto& pc : ps) {
                Jet2 term = pc.has_coeff ? pc.coeff.jet(p) : Jet2::constant(1.0, dim);
                if (pc.m > 0) term = term * powi(pc.denom.jet(p), -pc.m);
                acc = pc.negated ? acc - term : acc + term;
            }
            return acc.jet1();
        };
    }
    return out;
}

TwoFormField compile_twoform(const std::string& text, const Bindings& b, const std::string& path) {
    TwoFormField out;
    out.dim = static_cast<int>(b.coords.size());
    out.comp.resize(static_cast<std::size_t>(FormValue::choose(out.dim, 2)));

    std::vector<TwoFormTerm> terms;
    try {
        terms = parse_twoform(text);
    } catch (const ParseError& e) {
        throw ParseError(std::string(e.what()) + " in " + path, e.line, e.col, e.expected);
    }

    struct Piece {
        BoundExpr coeff;
        bool has_coeff = false;
        double sign = 1.0;
    };
    std::map<std::size_t, std::vector<Piece>> pieces;
    FormValue proto(2, out.dim);

    for (const TwoFormTerm& t : terms) {
        int ia = -1, ib = -1;
        for (std::size_t i = 0; i < b.coords.size(); ++i) {
            if (b.coords[i] == t.coord_a) ia = static_cast<int>(i);
            if (b.coords[i] == t.coord_b) ib = static_cast<int>(i);
        }
        if (ia < 0) throw ValidationError("unknown coordinate '" + t.coord_a + "'", path);
        if (ib < 0) throw ValidationError("unknown coordinate '" + t.coord_b + "'", path);
        if (ia == ib) throw ValidationError("d(" + t.coord_a + ")^d(" + t.coord_b + ") is zero", path);
        Piece pc;
        pc.sign = t.negated ? -1.0 : 1.0;
        if (ia > ib) {
            std::swap(ia, ib);
            pc.sign = -pc.sign;
        }
        if (t.coeff) {
            try {
                pc.coeff = BoundExpr(t.coeff, b);
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), path);
            }
            pc.has_coeff = true;
        }
        int idx[2] = {ia, ib};
        pieces[proto.rank(idx, 2)].push_back(std::move(pc));
    }

    const int dim = out.dim;
    for (auto& [rank, ps] : pieces) {
        auto local = ps;
        out.comp[rank] = [local, dim](const Vec& p) -> Jet1 {
            Jet2 acc = Jet2::constant(0.0, dim);
            for (const auto& pc : local) {
                Jet2 term = pc.has_coeff ? pc.coeff.jet(p) : Jet2::constant(1.0, dim);
                acc = acc + pc.sign * term;
            }
            return acc.jet1();
        };
    }
    return out;
}

SystemSpec compile_system(const SystemDoc& doc) {
    SystemSpec sys;
    sys.name = doc.name;
    if (doc.coordinates.empty()) throw SchemaError("at least one coordinate required", ".coordinates");
    if (doc.coordinates.size() > 6)
        throw ValidationError("at most 6 coordinates supported", "coordinates");

    Bindings b;
    for (const auto& cd : doc.coordinates) {
        for (const auto& prev : sys.coords)
            if (prev.name == cd.name)
                throw ValidationError("duplicate coordinate '" + cd.name + "'", "coordinates");
        Coordinate c;
        c.name = cd.name;
        c.periodic = cd.periodic;
        c.period = cd.period;
        sys.coords.push_back(c);
        b.coords.push_back(cd.name);
    }
    sys.params = doc.parameters;
    b.params = &sys.params;
    const int n = sys.dim();

    // Sampling box (defaults to [-1, 1]^n).
    sys.sample_lo = Vec::Constant(n, -1.0);
    sys.sample_hi = Vec::Constant(n, 1.0);
    if (!doc.lo.empty() || !doc.hi.empty()) {
        if (static_cast<int>(doc.lo.size()) != n || static_cast<int>(doc.hi.size()) != n)
            throw ValidationError("sampling lo/hi must have one entry per coordinate", "sampling");
        for (int i = 0; i < n; ++i) {
            sys.sample_lo[i] = doc.lo[static_cast<std::size_t>(i)];
            sys.sample_hi[i] = doc.hi[static_cast<std::size_t>(i)];
        }
    }

    std::shared_ptr<const Ast> crit_ast;
    if (doc.critical) {
        crit_ast = parse_in(*doc.critical, "form.critical");
        SingularData s;
        s.m = doc.m > 0 ? doc.m : 1;
        s.crit = field_of(crit_ast, b, "form.critical");
        s.valid_halfwidth = doc.valid_halfwidth;

        // The critical function must depend on exactly one coordinate (the
        // singular axis).
        Rng rng(777);
        int axis = -1;
        for (int trial = 0; trial < 6; ++trial) {
            Vec p = rng.box(sys.sample_lo, sys.sample_hi);
            Jet2 cz;
            try {
                cz = s.crit(p);
            } catch (const DomainError&) {
                continue;
            }
            for (int i = 0; i < n; ++i) {
                if (std::abs(cz.g[i]) > 1e-9) {
                    if (axis >= 0 && axis != i)
                        throw ValidationError("critical function must depend on a single coordinate",
                                              "form.critical");
                    axis = i;
                }
            }
        }
        if (axis < 0)
            throw ValidationError("critical function gradient vanishes on the sampling box",
                                  "form.critical");
        s.axis = axis;

        if (doc.u) s.u = compile_scalar(*doc.u, b, "form.u");
        if (doc.beta) s.beta = compile_oneform(*doc.beta, b, nullptr, 0, -1, "form.beta");
        else {
            s.beta.dim = n;
            s.beta.coef.resize(static_cast<std::size_t>(n));
        }
        if (doc.u || doc.beta) {
            if (!doc.u) throw SchemaError("decomposition needs u when beta is given", "form.u");
            sys.sing = std::move(s);
        } else if (doc.ambient) {
            // Critical function + ambient only: singular structure without
            // decomposition data (on-Z operations will refuse to run).
            sys.sing = std::move(s);
        } else {
            throw SchemaError("form needs u/beta or ambient", "form");
        }
    }

    if (doc.ambient) {
        const int axis = sys.sing ? sys.sing->axis : -1;
        const int m = sys.sing ? sys.sing->m : 0;
        sys.alpha = compile_oneform(*doc.ambient, b, crit_ast.get(), m, axis, "form.ambient");
    }

    if (doc.h || doc.omega || !doc.liouville.empty()) {
        HamiltonianData ham;
        if (!doc.h) throw SchemaError("hamiltonian table needs h", "hamiltonian.h");
        if (!doc.omega) throw SchemaError("hamiltonian table needs omega", "hamiltonian.omega");
        ham.h = compile_scalar(*doc.h, b, "hamiltonian.h");
        ham.omega = compile_twoform(*doc.omega, b, "hamiltonian.omega");
        if (!doc.liouville.empty()) {
            if (static_cast<int>(doc.liouville.size()) != n)
                throw ValidationError("liouville needs one component per coordinate", "hamiltonian.liouville");
            for (std::size_t i = 0; i < doc.liouville.size(); ++i) {
                const std::string& txt = doc.liouville[i];
                if (txt == "0") {
                    ham.liouville.emplace_back();
                    continue;
                }
                ScalarField f =
                    compile_scalar(txt, b, "hamiltonian.liouville[" + std::to_string(i) + "]");
                ham.liouville.push_back([f](const Vec& p) { return f(p).jet1(); });
            }
        }
        ham.c = doc.energy;
        sys.ham = std::move(ham);
        sys.conserved.emplace_back("H", sys.ham->h);
    }

    // Contact form: explicit ambient wins, else iota_Y omega on level sets.
    if (sys.alpha.empty() && sys.ham && !sys.ham->liouville.empty() && sys.ham->c)
        sys.alpha = contract_two_form(sys.ham->omega, sys.ham->liouville);

    for (std::size_t i = 0; i < doc.witness.size(); ++i) {
        sys.witnesses.push_back(
            compile_scalar(doc.witness[i], b, "witness.fields[" + std::to_string(i) + "]"));
        if (i < doc.witness_rate.size() && !doc.witness_rate[i].empty())
            sys.witness_rates.push_back(
                compile_scalar(doc.witness_rate[i], b, "witness.rates[" + std::to_string(i) + "]"));
        else
            sys.witness_rates.emplace_back();
    }

    install_default_samplers(sys);

    sys.spec_hash = hash_string(doc.source_text.empty() ? doc.name : doc.source_text);

    // Eager invariant: when both routes exist, they must agree off Z.
    if (sys.sing && sys.sing->u && !sys.alpha.empty()) {
        Rng rng(31);
        int checked = 0;
        double worst = 0.0;
        for (int attempt = 0; attempt < 200 && checked < 8; ++attempt) {
            Vec p;
            try {
                p = sys.off_z_sampler(rng);
            } catch (const Error&) {
                break;
            }
            const double z = sys.sing->crit(p).v;
            if (std::abs(z) >= sys.sing->valid_halfwidth) continue;
            try {
                worst = std::max(worst, decomposition_mismatch(sys, p));
                ++checked;
            } catch (const Error&) {
                continue;
            }
        }
        if (checked > 0 && worst > 1e-10)
            throw ValidationError("ambient form and u,beta decomposition disagree (relative " +
                                      std::to_string(worst) + ")",
                                  "form");
    }

    return sys;
}

SystemSpec load_system_file(const std::string& path) {
    return compile_system(parse_system_file(path));
}

void install_default_samplers(SystemSpec& sys) {
    // Box draw, then Newton projection onto the level set and away from/onto Z.
    {
        Vec lo = sys.sample_lo, hi = sys.sample_hi;
        std::optional<SingularData> sing = sys.sing;
        std::optional<HamiltonianData> ham = sys.ham;
        auto accept = sys.sample_accept;
        auto project_level = [ham](Vec p) {
            if (!ham || !ham->c) return p;
            for (int it = 0; it < 40; ++it) {
                const Jet2 hj = ham->h(p);
                const double r = hj.v - *ham->c;
                if (std::abs(r) < 1e-13) break;
                p -= r * hj.g / hj.g.squaredNorm();
            }
            return p;
        };
        sys.off_z_sampler = [lo, hi, sing, ham, accept, project_level](Rng& rng) -> Vec {
            for (int attempt = 0; attempt < 400; ++attempt) {
                Vec p;
                try {
                    p = project_level(rng.box(lo, hi));
                } catch (const DomainError&) {
                    continue;
                }
                if (accept && !accept(p)) continue;
                if (ham && ham->c && std::abs(ham->h(p).v - *ham->c) > 1e-10) continue;
                if (sing && std::abs(sing->crit(p).v) < 1e-4) continue;
                return p;
            }
            throw Error("off-Z sampler failed to find an admissible point");
        };
        if (sys.sing) {
            SingularData s2 = *sys.sing;
            sys.on_z_sampler = [lo, hi, s2, accept, project_level, ham](Rng& rng) -> Vec {
                for (int attempt = 0; attempt < 400; ++attempt) {
                    Vec p = rng.box(lo, hi);
                    bool ok = true;
                    for (int it = 0; it < 60; ++it) {
                        Jet2 cz;
                        try {
                            cz = s2.crit(p);
                        } catch (const DomainError&) {
                            ok = false;
                            break;
                        }
                        const double g = cz.g[s2.axis];
                        if (std::abs(g) < 1e-12) {
                            ok = false;
                            break;
                        }
                        p[s2.axis] -= cz.v / g;
                        if (ham && ham->c) p = project_level(p);
                        if (std::abs(s2.crit(p).v) < 1e-14 &&
                            (!ham || !ham->c || std::abs(ham->h(p).v - *ham->c) < 1e-12))
                            break;
                    }
                    if (!ok) continue;
                    if (std::abs(s2.crit(p).v) > 1e-13) continue;
                    if (accept && !accept(p)) continue;
                    return p;
                }
                throw Error("on-Z sampler failed to converge");
            };
        }
    }
}

} // namespace reeblab
