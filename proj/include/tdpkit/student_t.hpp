#pragma once

namespace tdpkit {

/// P(|T| > |t|) for Student's t with integer `df` >= 1.
///
/// Uses the closed-form finite series for integer degrees of freedom. For
/// t^2 > df the complementary tail series is summed directly, so small
/// p-values keep full relative precision instead of cancelling against 1.
double student_t_two_sided_sf(double t, int df);

/// P(T > t).
double student_t_upper_sf(double t, int df);

/// Signed equivalent normal deviate for a two-sided p-value: the z with
/// P(|Z| > |z|) = p and sign(z) = sign(t).
double equivalent_z(double p_two_sided, double t);

} // namespace tdpkit
