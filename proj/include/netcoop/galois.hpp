#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "netcoop/random.hpp"

namespace netcoop::galois {

using Element = std::uint32_t;

/// Order of a supported finite field: a prime up to 65537 or 2^m with 1 <= m <= 16.
class FieldSpec
{
public:
  explicit FieldSpec(std::uint32_t q);

  std::uint32_t q() const noexcept { return m_q; }
  bool is_binary_extension() const noexcept { return m_degree > 0; }
  /// m for q = 2^m, zero for odd primes.
  unsigned degree() const noexcept { return m_degree; }

  bool operator==(const FieldSpec&) const = default;

private:
  std::uint32_t m_q;
  unsigned m_degree = 0;
};

/// Primitive reduction polynomial used for GF(2^m), bit i holding the x^i coefficient.
std::uint32_t reduction_polynomial(unsigned m);

/// Exact arithmetic in GF(q).
///
/// Binary extension fields use log/antilog tables built from a primitive
/// polynomial; prime fields use modular arithmetic. Instances are immutable
/// after construction and may be shared between threads.
class GaloisField
{
public:
  explicit GaloisField(FieldSpec spec);

  const FieldSpec& spec() const noexcept { return m_spec; }
  std::uint32_t order() const noexcept { return m_spec.q(); }

  Element add(Element a, Element b) const;
  Element sub(Element a, Element b) const;
  Element mul(Element a, Element b) const;
  /// Throws std::domain_error for a == 0.
  Element inv(Element a) const;

private:
  FieldSpec m_spec;
  std::vector<std::uint32_t> m_log;
  std::vector<Element> m_exp; // doubled to skip the modulo in mul
};

/// K source packets coded together, identified abstractly.
struct Generation
{
  std::uint64_t id = 0;
  std::vector<std::uint64_t> payload_ids;

  std::size_t k() const noexcept { return payload_ids.size(); }
  /// Requires k >= 1 and distinct identifiers.
  void validate() const;
};

struct CodedPacket
{
  std::uint64_t generation_id = 0;
  std::vector<Element> coefficients;
};

/// One uniformly random linear combination; the all-zero vector is possible.
CodedPacket encode(const GaloisField& field, const Generation& gen, RandomStream& rng);

/// Receiver-side rank tracker for one generation.
///
/// Keeps the received coefficient vectors in reduced row-echelon form; payloads
/// are not carried. The field must outlive the decoder.
class DecoderState
{
public:
  DecoderState(const GaloisField& field, std::uint64_t generation_id, std::size_t k);

  /// Returns true when the packet raised the rank. Throws std::domain_error on a
  /// generation or length mismatch.
  bool absorb(const CodedPacket& pkt);

  /// Adds a coefficient vector directly (used for side information).
  bool absorb(std::span<const Element> coefficients);

  /// Marks source packet `index` as already known (a unit coefficient row).
  bool add_known_packet(std::size_t index);

  std::size_t rank() const noexcept { return m_rows.size(); }
  std::size_t k() const noexcept { return m_k; }
  bool complete() const noexcept { return m_rows.size() == m_k; }
  std::uint64_t generation_id() const noexcept { return m_generation_id; }

  const std::vector<std::vector<Element>>& rows() const noexcept { return m_rows; }

private:
  const GaloisField* m_field;
  std::uint64_t m_generation_id;
  std::size_t m_k;
  std::vector<std::vector<Element>> m_rows;
  std::vector<std::size_t> m_pivots;
};

/// Pr[M = l], M being the number of uniform random vectors in GF(q)^k drawn
/// until they first span the whole space. Throws std::domain_error for l < k.
double decode_count_pmf(const FieldSpec& spec, std::size_t k, std::size_t l);

/// Draws M from decode_count_pmf by inversion.
class RankCompletionSampler
{
public:
  RankCompletionSampler(const FieldSpec& spec, std::size_t k);

  std::size_t operator()(RandomStream& rng) const;
  std::size_t k() const noexcept { return m_k; }

private:
  std::size_t m_k;
  std::vector<double> m_cdf; // m_cdf[i] = Pr[M <= k + i]
};

} // namespace netcoop::galois

namespace netcoop {

/// Network-coding parameters: field order q and generation size K.
struct NcParams
{
  std::uint32_t q = 2;
  std::size_t k = 1;

  /// Throws ValidationError for an unsupported q or K = 0.
  galois::FieldSpec field() const;
  void validate() const { (void)field(); }
};

} // namespace netcoop
