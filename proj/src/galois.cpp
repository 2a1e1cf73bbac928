#include "netcoop/galois.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

#include "netcoop/model.hpp"

namespace netcoop::galois {

namespace {

bool is_prime(std::uint32_t q)
{
  if (q < 2) {
    return false;
  }
  for (std::uint32_t d = 2; static_cast<std::uint64_t>(d) * d <= q; ++d) {
    if (q % d == 0) {
      return false;
    }
  }
  return true;
}

// Primitive polynomials for GF(2^m), m = 1..16.
constexpr std::uint32_t primitive_polys[] = {
  0x3,    0x7,    0xB,    0x13,   0x25,   0x43,   0x89,    0x11D,
  0x211,  0x409,  0x805,  0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
};

} // namespace

FieldSpec::FieldSpec(std::uint32_t q)
  : m_q{q}
{
  if (q >= 2 && std::has_single_bit(q)) {
    m_degree = static_cast<unsigned>(std::countr_zero(q));
    if (m_degree > 16) {
      throw ValidationError("field order 2^" + std::to_string(m_degree) + " exceeds 2^16");
    }
    return;
  }
  if (!is_prime(q)) {
    throw ValidationError("field order " + std::to_string(q) + " is neither a prime nor a power of two");
  }
  if (q > 65537) {
    throw ValidationError("prime field order " + std::to_string(q) + " exceeds 65537");
  }
}

std::uint32_t reduction_polynomial(unsigned m)
{
  if (m < 1 || m > 16) {
    throw std::out_of_range("no reduction polynomial for m = " + std::to_string(m));
  }
  return primitive_polys[m - 1];
}

GaloisField::GaloisField(FieldSpec spec)
  : m_spec{spec}
{
  if (!m_spec.is_binary_extension()) {
    return;
  }
  const std::uint32_t q = m_spec.q();
  const std::uint32_t poly = reduction_polynomial(m_spec.degree());
  m_log.assign(q, 0);
  m_exp.assign(2 * static_cast<std::size_t>(q), 0);
  std::uint32_t b = 1;
  for (std::uint32_t i = 0; i + 1 < q; ++i) {
    if (i > 0 && b == 1) {
      throw std::logic_error("reduction polynomial is not primitive");
    }
    m_exp[i] = b;
    m_log[b] = i;
    b <<= 1;
    if (b & q) {
      b ^= poly;
    }
  }
  for (std::size_t i = q - 1; i < m_exp.size(); ++i) {
    m_exp[i] = m_exp[i - (q - 1)];
  }
}

Element GaloisField::add(Element a, Element b) const
{
  if (m_spec.is_binary_extension()) {
    return a ^ b;
  }
  const std::uint32_t q = m_spec.q();
  const std::uint64_t s = static_cast<std::uint64_t>(a) + b;
  return static_cast<Element>(s >= q ? s - q : s);
}

Element GaloisField::sub(Element a, Element b) const
{
  if (m_spec.is_binary_extension()) {
    return a ^ b;
  }
  return a >= b ? a - b : a + (m_spec.q() - b);
}

Element GaloisField::mul(Element a, Element b) const
{
  if (a == 0 || b == 0) {
    return 0;
  }
  if (m_spec.is_binary_extension()) {
    return m_exp[m_log[a] + m_log[b]];
  }
  return static_cast<Element>((static_cast<std::uint64_t>(a) * b) % m_spec.q());
}

Element GaloisField::inv(Element a) const
{
  if (a == 0) {
    throw std::domain_error("inverse of zero in GF(" + std::to_string(m_spec.q()) + ")");
  }
  const std::uint32_t q = m_spec.q();
  if (m_spec.is_binary_extension()) {
    return m_exp[(q - 1 - m_log[a]) % (q - 1)];
  }
  // Extended Euclid over the integers.
  std::int64_t t = 0, new_t = 1;
  std::int64_t r = q, new_r = a;
  while (new_r != 0) {
    const std::int64_t quotient = r / new_r;
    t = std::exchange(new_t, t - quotient * new_t);
    r = std::exchange(new_r, r - quotient * new_r);
  }
  if (t < 0) {
    t += q;
  }
  return static_cast<Element>(t);
}

void Generation::validate() const
{
  if (payload_ids.empty()) {
    throw ValidationError("generation must hold at least one packet");
  }
  const std::unordered_set<std::uint64_t> seen(payload_ids.begin(), payload_ids.end());
  if (seen.size() != payload_ids.size()) {
    throw ValidationError("generation payload identifiers must be distinct");
  }
}

CodedPacket encode(const GaloisField& field, const Generation& gen, RandomStream& rng)
{
  CodedPacket pkt;
  pkt.generation_id = gen.id;
  pkt.coefficients.resize(gen.k());
  for (auto& c : pkt.coefficients) {
    c = static_cast<Element>(rng.uniform_below(field.order()));
  }
  return pkt;
}

DecoderState::DecoderState(const GaloisField& field, std::uint64_t generation_id, std::size_t k)
  : m_field{&field}
  , m_generation_id{generation_id}
  , m_k{k}
{
  if (k == 0) {
    throw ValidationError("decoder generation size must be positive");
  }
}

bool DecoderState::absorb(const CodedPacket& pkt)
{
  if (pkt.generation_id != m_generation_id) {
    throw std::domain_error("coded packet belongs to generation " + std::to_string(pkt.generation_id) +
                            ", decoder tracks " + std::to_string(m_generation_id));
  }
  return absorb(pkt.coefficients);
}

bool DecoderState::absorb(std::span<const Element> coefficients)
{
  if (coefficients.size() != m_k) {
    throw std::domain_error("coefficient vector length " + std::to_string(coefficients.size()) +
                            " does not match generation size " + std::to_string(m_k));
  }
  if (complete()) {
    return false;
  }
  const GaloisField& f = *m_field;
  std::vector<Element> v(coefficients.begin(), coefficients.end());

  for (std::size_t r = 0; r < m_rows.size(); ++r) {
    const Element factor = v[m_pivots[r]];
    if (factor == 0) {
      continue;
    }
    const auto& row = m_rows[r];
    for (std::size_t c = m_pivots[r]; c < m_k; ++c) {
      v[c] = f.sub(v[c], f.mul(factor, row[c]));
    }
  }

  const auto lead = std::find_if(v.begin(), v.end(), [](Element e) { return e != 0; });
  if (lead == v.end()) {
    return false;
  }
  const std::size_t pivot = static_cast<std::size_t>(lead - v.begin());
  const Element scale = f.inv(v[pivot]);
  for (std::size_t c = pivot; c < m_k; ++c) {
    v[c] = f.mul(v[c], scale);
  }

  // Clear the new pivot column from the existing rows to stay fully reduced.
  for (auto& row : m_rows) {
    const Element factor = row[pivot];
    if (factor == 0) {
      continue;
    }
    for (std::size_t c = pivot; c < m_k; ++c) {
      row[c] = f.sub(row[c], f.mul(factor, v[c]));
    }
  }

  const auto at = std::upper_bound(m_pivots.begin(), m_pivots.end(), pivot);
  const auto offset = at - m_pivots.begin();
  m_pivots.insert(at, pivot);
  m_rows.insert(m_rows.begin() + offset, std::move(v));
  return true;
}

bool DecoderState::add_known_packet(std::size_t index)
{
  if (index >= m_k) {
    throw std::domain_error("known packet index out of range");
  }
  std::vector<Element> unit(m_k, 0);
  unit[index] = 1;
  return absorb(unit);
}

double decode_count_pmf(const FieldSpec& spec, std::size_t k, std::size_t l)
{
  if (k == 0) {
    throw std::domain_error("generation size must be positive");
  }
  if (l < k) {
    throw std::domain_error("decode count l=" + std::to_string(l) + " is below generation size k=" +
                            std::to_string(k));
  }
  // q^-(l-k) (1 - q^-k) prod_{j=l+1-k}^{l-1} (1 - q^-j); every exponent is
  // negative so nothing overflows, and small powers underflow harmlessly to 0.
  const double q = spec.q();
  const auto kd = static_cast<double>(k);
  const auto ld = static_cast<double>(l);
  double p = std::pow(q, -(ld - kd)) * -std::expm1(-kd * std::log(q));
  for (std::size_t j = l + 1 - k; j + 1 <= l; ++j) {
    p *= -std::expm1(-static_cast<double>(j) * std::log(q));
  }
  return p;
}

RankCompletionSampler::RankCompletionSampler(const FieldSpec& spec, std::size_t k)
  : m_k{k}
{
  double cdf = 0.0;
  for (std::size_t l = k;; ++l) {
    const double p = decode_count_pmf(spec, k, l);
    cdf += p;
    m_cdf.push_back(cdf);
    if (1.0 - cdf < 1e-16 || p == 0.0 || m_cdf.size() > 4096) {
      break;
    }
  }
  m_cdf.back() = 1.0;
}

std::size_t RankCompletionSampler::operator()(RandomStream& rng) const
{
  const double u = rng.uniform();
  const auto it = std::upper_bound(m_cdf.begin(), m_cdf.end(), u);
  return m_k + static_cast<std::size_t>(it - m_cdf.begin());
}

} // namespace netcoop::galois

namespace netcoop {

galois::FieldSpec NcParams::field() const
{
  if (k < 1) {
    throw ValidationError("generation size K must be at least 1");
  }
  return galois::FieldSpec{q};
}

} // namespace netcoop
