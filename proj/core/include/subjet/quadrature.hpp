#pragma once

#include <functional>

namespace subjet {

// Gauss-Legendre rule with n in {3,4,5,7,15} on [a,b]; exact through
// degree 2n-1.
double gauss_panel(const std::function<double(double)>& f, double a, double b,
                   int n);

// Composite Gauss-Legendre with `panels` equal subintervals.
double gauss_composite(const std::function<double(double)>& f, double a,
                       double b, int n, int panels);

// Adaptive Gauss-Kronrod (G7,K15) to the requested relative tolerance
// (absolute floor abs_tol). Bisects until the embedded error estimate is
// below tolerance; throws DomainError when subdivision exhausts depth.
double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, double abs_tol = 0.0);

// Safeguarded Newton on [lo, hi]: bisection step whenever the Newton step
// leaves the bracket or fails to shrink it. fdf returns {value, derivative}.
// Converges to relative tolerance rel_tol on the root.
double newton_bracketed(const std::function<void(double, double&, double&)>& fdf,
                        double lo, double hi, double rel_tol,
                        int max_iter = 200);

// Bisection on a sign change; f(lo) and f(hi) must differ in sign.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double rel_tol, int max_iter = 400);

}  // namespace subjet
