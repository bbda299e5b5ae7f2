#include "lnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lnet/rng.hpp"
#include "json.hpp"

namespace lnet {

namespace fs = std::filesystem;
using nlohmann::json;

ElementVocab::ElementVocab(std::vector<Entry> entries)
    : entries_(std::move(entries)) {}

ElementVocab ElementVocab::qm9() {
  return ElementVocab({{"H", 1}, {"C", 6}, {"N", 7}, {"O", 8}, {"F", 9}});
}

ElementVocab ElementVocab::dipole() {
  return ElementVocab({{"+", kPseudoPlus}, {"-", kPseudoMinus}});
}

ElementVocab ElementVocab::carbon() { return ElementVocab({{"C", 6}}); }

ElementVocab ElementVocab::extended() {
  auto entries = qm9().entries();
  entries.push_back({"+", kPseudoPlus});
  entries.push_back({"-", kPseudoMinus});
  return ElementVocab(std::move(entries));
}

int ElementVocab::code_of(const std::string& symbol) const {
  for (const Entry& e : entries_)
    if (e.symbol == symbol) return e.code;
  throw std::invalid_argument("ElementVocab: unknown element '" + symbol + "'");
}

const std::string& ElementVocab::symbol_of(int code) const {
  for (const Entry& e : entries_)
    if (e.code == code) return e.symbol;
  throw std::invalid_argument("ElementVocab: unknown element code " +
                              std::to_string(code));
}

std::size_t ElementVocab::index_of(int code) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].code == code) return i;
  throw std::invalid_argument("ElementVocab: unknown element code " +
                              std::to_string(code));
}

bool ElementVocab::contains(int code) const {
  for (const Entry& e : entries_)
    if (e.code == code) return true;
  return false;
}

double Molecule::target(const std::string& name) const {
  auto it = targets.find(name);
  if (it == targets.end())
    throw std::invalid_argument("Molecule: missing target '" + name + "'");
  return it->second.value;
}

void Molecule::validate() const {
  const std::size_t n = num_atoms();
  if (n < 1) throw std::invalid_argument("Molecule: needs at least one atom");
  if (positions.size() != 3 * n)
    throw std::invalid_argument("Molecule: positions length " +
                                std::to_string(positions.size()) +
                                " does not match " + std::to_string(n) +
                                " atoms");
  for (double p : positions)
    if (!std::isfinite(p))
      throw std::invalid_argument("Molecule: non-finite position");
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dx = positions[3 * a] - positions[3 * b];
      const double dy = positions[3 * a + 1] - positions[3 * b + 1];
      const double dz = positions[3 * a + 2] - positions[3 * b + 2];
      if (std::sqrt(dx * dx + dy * dy + dz * dz) < 1e-6)
        throw std::invalid_argument("Molecule: atoms " + std::to_string(a) +
                                    " and " + std::to_string(b) +
                                    " are closer than 1e-6 angstrom");
    }
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == s) out.push_back(i);
  return out;
}

const std::vector<std::pair<std::string, std::string>>&
qm9_property_columns() {
  // Column order of the QM9 distribution's property record (after the
  // "gdb <index>" tag), per the dataset README.
  static const std::vector<std::pair<std::string, std::string>> cols = {
      {"A", "GHz"},          {"B", "GHz"},      {"C", "GHz"},
      {"mu", "Debye"},       {"alpha", "a0^3"}, {"homo", "Ha"},
      {"lumo", "Ha"},        {"gap", "Ha"},     {"r2", "a0^2"},
      {"zpve", "Ha"},        {"U0", "Ha"},      {"U", "Ha"},
      {"H", "Ha"},           {"G", "Ha"},       {"Cv", "cal/(mol*K)"}};
  return cols;
}

namespace {

[[noreturn]] void parse_error(std::size_t line_no, const std::string& msg) {
  throw std::invalid_argument("parse_xyz: line " + std::to_string(line_no) +
                              ": " + msg);
}

// QM9 files write some exponents Fortran style, e.g. "1.2*^-5".
std::string normalize_exponent(std::string token) {
  const auto pos = token.find("*^");
  if (pos != std::string::npos) token.replace(pos, 2, "e");
  return token;
}

double parse_double(const std::string& token, std::size_t line_no) {
  const std::string t = normalize_exponent(token);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) parse_error(line_no, "bad number '" + token + "'");
    return v;
  } catch (const std::invalid_argument&) {
    parse_error(line_no, "bad number '" + token + "'");
  } catch (const std::out_of_range&) {
    parse_error(line_no, "number out of range '" + token + "'");
  }
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream is(line);
  std::string t;
  while (is >> t) tokens.push_back(t);
  return tokens;
}

void parse_property_record(const std::string& line, std::size_t line_no,
                           Molecule& mol) {
  const auto tokens = tokenize(line);
  if (tokens.empty()) return;  // no targets
  if (tokens[0] == "gdb") {
    // Positional QM9 record: tag, index, then the 15 property columns.
    const auto& cols = qm9_property_columns();
    if (tokens.size() < 2 + cols.size())
      parse_error(line_no, "QM9 property record has " +
                               std::to_string(tokens.size()) +
                               " fields, expected " +
                               std::to_string(2 + cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      mol.targets[cols[c].first] = {parse_double(tokens[2 + c], line_no),
                                    cols[c].second};
    return;
  }
  // Named record: tag then name=value[:unit] tokens.
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      parse_error(line_no, "bad property token '" + tok + "'");
    const std::string name = tok.substr(0, eq);
    std::string rest = tok.substr(eq + 1);
    std::string unit;
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      unit = rest.substr(colon + 1);
      rest = rest.substr(0, colon);
    }
    mol.targets[name] = {parse_double(rest, line_no), unit};
  }
}

Molecule parse_xyz_block(const std::vector<std::string>& lines,
                         std::size_t start, const ElementVocab& vocab,
                         std::size_t* consumed) {
  // Line numbers in errors are 1-based file positions.
  if (start >= lines.size()) parse_error(start + 1, "empty input");
  std::size_t count = 0;
  try {
    count = std::stoul(lines[start]);
  } catch (const std::exception&) {
    parse_error(start + 1, "bad atom count '" + lines[start] + "'");
  }
  if (count == 0) parse_error(start + 1, "atom count must be positive");
  const std::size_t remaining = lines.size() - start;
  if (remaining < 2 + count)
    parse_error(start + remaining + 1,
                "expected " + std::to_string(count) +
                    " atom lines, input ends after " +
                    std::to_string(remaining < 2 ? 0 : remaining - 2));

  Molecule mol;
  parse_property_record(lines[start + 1], start + 2, mol);
  for (std::size_t a = 0; a < count; ++a) {
    const std::size_t line_no = start + 3 + a;
    const auto tokens = tokenize(lines[start + 2 + a]);
    if (tokens.size() < 4)
      parse_error(line_no, "atom line needs element and 3 coordinates");
    mol.atomic_numbers.push_back(vocab.code_of(tokens[0]));
    for (int c = 0; c < 3; ++c)
      mol.positions.push_back(parse_double(tokens[1 + c], line_no));
    // Column 5 (Mulliken charge in QM9) is accepted and ignored.
  }
  mol.validate();
  if (consumed) *consumed = 2 + count;
  return mol;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_count_line(const std::string& line) {
  const auto tokens = tokenize(line);
  if (tokens.size() != 1) return false;
  return tokens[0].find_first_not_of("0123456789") == std::string::npos &&
         !tokens[0].empty();
}

}  // namespace

Molecule parse_xyz(const std::string& text, const ElementVocab& vocab) {
  return parse_xyz_block(split_lines(text), 0, vocab, nullptr);
}

std::vector<Molecule> parse_xyz_frames(const std::string& text,
                                       const ElementVocab& vocab) {
  const auto lines = split_lines(text);
  std::vector<Molecule> out;
  std::size_t pos = 0;
  while (pos < lines.size()) {
    if (!is_count_line(lines[pos])) {
      ++pos;  // trailing frequency/SMILES/InChI lines between frames
      continue;
    }
    std::size_t consumed = 0;
    out.push_back(parse_xyz_block(lines, pos, vocab, &consumed));
    pos += consumed;
  }
  return out;
}

std::string serialize_xyz(const Molecule& mol, const ElementVocab& vocab) {
  std::ostringstream os;
  os.precision(17);
  os << mol.num_atoms() << "\n";
  os << "lnet";
  for (const auto& [name, tv] : mol.targets) {
    os << "\t" << name << "=" << tv.value;
    if (!tv.unit.empty()) os << ":" << tv.unit;
  }
  os << "\n";
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) {
    os << vocab.symbol_of(mol.atomic_numbers[a]);
    for (int c = 0; c < 3; ++c) os << "\t" << mol.positions[3 * a + c];
    os << "\n";
  }
  return os.str();
}

Dataset gen_two_dipole(std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("gen_two_dipole: need at least one sample");
  Rng rng(seed);
  Dataset ds;
  ds.molecules.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto u = random_unit_vector(rng);
    Molecule mol;
    // Pair 1: fixed along z. Separation vectors run + -> -, so
    // cos(theta12) = u_z and p^2 = 2 + 2 u_z for unit dipoles.
    mol.atomic_numbers = {kPseudoPlus, kPseudoMinus, kPseudoPlus,
                          kPseudoMinus};
    mol.positions = {0.0, 0.0, 0.0,   0.0, 0.0, 1.0,
                     3.0 - 0.5 * u[0], -0.5 * u[1], -0.5 * u[2],
                     3.0 + 0.5 * u[0], 0.5 * u[1], 0.5 * u[2]};
    const double cos12 = u[2];
    const double p2 = 2.0 + 2.0 * cos12;
    mol.targets["p2"] = {p2, ""};
    mol.targets["p"] = {std::sqrt(std::max(0.0, p2)), ""};
    mol.validate();
    ds.molecules.push_back(std::move(mol));
  }
  return ds;
}

Dataset gen_distance_sum(std::size_t n_samples, std::size_t n_atoms,
                         std::uint64_t seed) {
  if (n_atoms < 2)
    throw std::invalid_argument("gen_distance_sum: need at least two atoms");
  constexpr double kBox = 4.0;
  constexpr double kMinSep = 0.5;
  Rng rng(seed);
  Dataset ds;
  ds.molecules.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Molecule mol;
    mol.atomic_numbers.assign(n_atoms, 6);
    while (mol.positions.size() < 3 * n_atoms) {
      const double x = uniform(rng, 0.0, kBox);
      const double y = uniform(rng, 0.0, kBox);
      const double z = uniform(rng, 0.0, kBox);
      bool ok = true;
      for (std::size_t a = 0; a < mol.positions.size() / 3; ++a) {
        const double dx = mol.positions[3 * a] - x;
        const double dy = mol.positions[3 * a + 1] - y;
        const double dz = mol.positions[3 * a + 2] - z;
        if (std::sqrt(dx * dx + dy * dy + dz * dz) < kMinSep) {
          ok = false;
          break;
        }
      }
      if (ok) mol.positions.insert(mol.positions.end(), {x, y, z});
    }
    double total = 0.0;
    for (std::size_t a = 0; a < n_atoms; ++a)
      for (std::size_t b = a + 1; b < n_atoms; ++b) {
        const double dx = mol.positions[3 * a] - mol.positions[3 * b];
        const double dy = mol.positions[3 * a + 1] - mol.positions[3 * b + 1];
        const double dz = mol.positions[3 * a + 2] - mol.positions[3 * b + 2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    mol.targets["dsum"] = {total, "angstrom"};
    mol.validate();
    ds.molecules.push_back(std::move(mol));
  }
  return ds;
}

void split_dataset(Dataset& ds, std::size_t n_train, std::size_t n_val,
                   std::uint64_t seed) {
  if (n_train + n_val > ds.size())
    throw std::invalid_argument(
        "split_dataset: " + std::to_string(n_train) + " + " +
        std::to_string(n_val) + " oversubscribes " +
        std::to_string(ds.size()) + " molecules");
  Rng rng(seed);
  const auto perm = random_permutation(ds.size(), rng);
  ds.assignment.assign(ds.size(), Split::Test);
  for (std::size_t i = 0; i < n_train; ++i)
    ds.assignment[perm[i]] = Split::Train;
  for (std::size_t i = 0; i < n_val; ++i)
    ds.assignment[perm[n_train + i]] = Split::Val;
  ds.split_seed = seed;
}

void save_dataset(const Dataset& ds, const std::string& dir,
                  std::uint64_t gen_seed, const ElementVocab& vocab) {
  fs::create_directories(dir);
  const std::string data_file = "data.xyz";
  std::ofstream os(fs::path(dir) / data_file);
  if (!os) throw std::runtime_error("save_dataset: cannot write to " + dir);
  for (const Molecule& mol : ds.molecules) os << serialize_xyz(mol, vocab);
  os.close();

  json manifest;
  manifest["files"] = {data_file};
  manifest["seed"] = gen_seed;
  manifest["num_molecules"] = ds.size();
  std::ofstream ms(fs::path(dir) / "manifest.json");
  ms << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir, const ElementVocab& vocab) {
  Dataset ds;
  std::vector<std::string> files;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream ms(manifest_path);
    json manifest = json::parse(ms);
    for (const auto& f : manifest.at("files"))
      files.push_back(f.get<std::string>());
  } else {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".xyz")
        files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
  }
  if (files.empty())
    throw std::runtime_error("load_dataset: no .xyz files under " + dir);
  for (const std::string& f : files) {
    std::ifstream is(fs::path(dir) / f);
    if (!is) throw std::runtime_error("load_dataset: cannot read " + f);
    std::stringstream buffer;
    buffer << is.rdbuf();
    auto mols = parse_xyz_frames(buffer.str(), vocab);
    std::move(mols.begin(), mols.end(), std::back_inserter(ds.molecules));
  }
  return ds;
}

}  // namespace lnet
