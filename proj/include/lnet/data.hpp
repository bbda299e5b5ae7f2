#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lnet {

// Element vocabulary mapping symbols to integer codes. Real elements use
// atomic numbers; synthetic dipole constituents use negative codes.
class ElementVocab {
 public:
  struct Entry {
    std::string symbol;
    int code;
  };

  ElementVocab() = default;
  explicit ElementVocab(std::vector<Entry> entries);

  static ElementVocab qm9();     // H C N O F
  static ElementVocab dipole();  // "+" -> -1, "-" -> -2
  static ElementVocab carbon();  // single-element control tasks
  // QM9 plus the synthetic pseudo-elements; default parser vocabulary.
  static ElementVocab extended();

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  int code_of(const std::string& symbol) const;           // throws if unknown
  const std::string& symbol_of(int code) const;           // throws if unknown
  std::size_t index_of(int code) const;                    // throws if unknown
  bool contains(int code) const;

 private:
  std::vector<Entry> entries_;
};

constexpr int kPseudoPlus = -1;
constexpr int kPseudoMinus = -2;

struct TargetValue {
  double value = 0.0;
  std::string unit;

  bool operator==(const TargetValue&) const = default;
};

struct Molecule {
  std::vector<double> positions;  // N*3, angstrom
  std::vector<int> atomic_numbers;
  std::map<std::string, TargetValue> targets;

  std::size_t num_atoms() const { return atomic_numbers.size(); }
  double target(const std::string& name) const;  // throws if missing
  // N >= 1, finite positions, no two atoms within 1e-6 angstrom.
  void validate() const;

  bool operator==(const Molecule&) const = default;
};

enum class Split { Train, Val, Test };

struct Dataset {
  std::vector<Molecule> molecules;
  std::vector<Split> assignment;  // empty until split() is applied
  std::uint64_t split_seed = 0;

  std::size_t size() const { return molecules.size(); }
  std::vector<std::size_t> indices(Split s) const;
};

// QM9-style extended XYZ: line 1 atom count, line 2 property record,
// then N lines "element x y z [charge]"; trailing lines are ignored.
// Property records are either positional QM9 ("gdb <index> <15 values>")
// or named ("name=value[:unit]" tokens). Fortran "*^" exponents are
// normalized during parsing.
Molecule parse_xyz(const std::string& text,
                   const ElementVocab& vocab = ElementVocab::extended());
std::string serialize_xyz(const Molecule& mol,
                          const ElementVocab& vocab = ElementVocab::extended());

// Multi-frame variant: concatenated XYZ blocks in one file.
std::vector<Molecule> parse_xyz_frames(
    const std::string& text,
    const ElementVocab& vocab = ElementVocab::extended());

// Names and units of the 15 positional QM9 properties (A..Cv).
const std::vector<std::pair<std::string, std::string>>& qm9_property_columns();

// Two unit dipoles: pair 1 fixed at (0,0,0)/(0,0,1), pair 2 centered 3 A
// along x with a uniformly random orientation. Targets: p2 = |p1+p2|^2 =
// 2 + 2 cos(theta12) and p = |p1+p2|; elements tag the +/- ends.
Dataset gen_two_dipole(std::size_t n_samples, std::uint64_t seed);

// Control task solvable from distances alone: points uniform in a 4 A box
// with minimum-separation rejection; target = sum of all pair distances.
Dataset gen_distance_sum(std::size_t n_samples, std::size_t n_atoms,
                         std::uint64_t seed);

// Uniform random disjoint assignment; remainder becomes the test split.
void split_dataset(Dataset& ds, std::size_t n_train, std::size_t n_val,
                   std::uint64_t seed);

// Directory I/O: molecules as multi-frame data.xyz plus manifest.json
// listing files, seed, and counts.
void save_dataset(const Dataset& ds, const std::string& dir,
                  std::uint64_t gen_seed,
                  const ElementVocab& vocab = ElementVocab::extended());
Dataset load_dataset(const std::string& dir,
                     const ElementVocab& vocab = ElementVocab::extended());

}  // namespace lnet
