#pragma once

// Forward-mode automatic differentiation. Dual<T, N> carries a value and N
// directional derivatives; nesting (Dual<Dual<double, M>, N>) yields mixed
// second derivatives, which is how the costate equations and the shooting
// Jacobians are obtained from a single templated Hamiltonian.

#include <array>
#include <cmath>
#include <type_traits>

namespace dyson::ad {

template <class T, int N>
struct Dual;

template <class T>
struct is_dual : std::false_type {};
template <class T, int N>
struct is_dual<Dual<T, N>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

template <class S, class T>
concept ScalarFor = std::is_arithmetic_v<S> || std::is_same_v<S, T>;

template <class T, int N>
struct Dual {
    using value_type = T;
    static constexpr int size = N;

    T v{};
    std::array<T, N> d{};

    Dual() = default;

    template <class S>
        requires ScalarFor<S, T>
    Dual(const S& x) : v(static_cast<T>(x)) {}

    /// Seeds the i-th derivative direction.
    static Dual variable(const T& x, int i) {
        Dual r(x);
        r.d[static_cast<std::size_t>(i)] = T(1.0);
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const T q = v / o.v;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) / o.v;
        v = q;
        return *this;
    }
    template <class S>
        requires ScalarFor<S, T>
    Dual& operator+=(const S& s) {
        v += s;
        return *this;
    }
    template <class S>
        requires ScalarFor<S, T>
    Dual& operator-=(const S& s) {
        v -= s;
        return *this;
    }
    template <class S>
        requires ScalarFor<S, T>
    Dual& operator*=(const S& s) {
        v *= s;
        for (int i = 0; i < N; ++i) d[i] *= s;
        return *this;
    }
    template <class S>
        requires ScalarFor<S, T>
    Dual& operator/=(const S& s) {
        v /= s;
        for (int i = 0; i < N; ++i) d[i] /= s;
        return *this;
    }
};

template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a) {
    a.v = -a.v;
    for (int i = 0; i < N; ++i) a.d[i] = -a.d[i];
    return a;
}

template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) { return a += b; }
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) { return a -= b; }
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, const Dual<T, N>& b) { return a *= b; }
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) { return a /= b; }

template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator+(Dual<T, N> a, const S& s) { return a += s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator+(const S& s, Dual<T, N> a) { return a += s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator-(Dual<T, N> a, const S& s) { return a -= s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator-(const S& s, const Dual<T, N>& a) {
    Dual<T, N> r = -a;
    r.v += s;
    return r;
}
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator*(Dual<T, N> a, const S& s) { return a *= s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator*(const S& s, Dual<T, N> a) { return a *= s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator/(Dual<T, N> a, const S& s) { return a /= s; }
template <class T, int N, class S>
    requires ScalarFor<S, T>
Dual<T, N> operator/(const S& s, const Dual<T, N>& a) {
    Dual<T, N> r;
    r.v = s / a.v;
    const T k = -r.v / a.v;
    for (int i = 0; i < N; ++i) r.d[i] = k * a.d[i];
    return r;
}

template <class T, int N, class Fn, class DFn>
Dual<T, N> chain(const Dual<T, N>& a, Fn&& f, DFn&& df) {
    Dual<T, N> r;
    r.v = f(a.v);
    const T k = df(a.v);
    for (int i = 0; i < N; ++i) r.d[i] = k * a.d[i];
    return r;
}

template <class T, int N>
Dual<T, N> sin(const Dual<T, N>& a) {
    using std::cos;
    using std::sin;
    return chain(a, [](const T& x) { return sin(x); }, [](const T& x) { return cos(x); });
}

template <class T, int N>
Dual<T, N> cos(const Dual<T, N>& a) {
    using std::cos;
    using std::sin;
    return chain(a, [](const T& x) { return cos(x); }, [](const T& x) { return -sin(x); });
}

template <class T, int N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
    using std::sqrt;
    Dual<T, N> r;
    r.v = sqrt(a.v);
    const T k = 0.5 / r.v;
    for (int i = 0; i < N; ++i) r.d[i] = k * a.d[i];
    return r;
}

template <class T, int N>
Dual<T, N> exp(const Dual<T, N>& a) {
    using std::exp;
    Dual<T, N> r;
    r.v = exp(a.v);
    for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
    return r;
}

/// Innermost double value of a (possibly nested) dual.
inline double value(double x) { return x; }
template <class T, int N>
double value(const Dual<T, N>& x) { return value(x.v); }

}  // namespace dyson::ad
