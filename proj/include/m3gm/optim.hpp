#ifndef M3GM_OPTIM_HPP_
#define M3GM_OPTIM_HPP_

#include <Eigen/Core>

namespace m3gm {

/// In-place AdaGrad step. `param` and `acc` may be any writable Eigen
/// expressions of the gradient's shape, such as rows or blocks.
template <typename P, typename G, typename A>
void adagrad_update(const Eigen::MatrixBase<P>& param_, const Eigen::MatrixBase<G>& grad,
                    const Eigen::MatrixBase<A>& acc_, double lr, double eps = 1e-8) {
    auto& param = const_cast<Eigen::MatrixBase<P>&>(param_);
    auto& acc = const_cast<Eigen::MatrixBase<A>&>(acc_);
    acc += grad.cwiseAbs2();
    param -= lr * grad.cwiseQuotient((acc.array().sqrt() + eps).matrix());
}

}  // namespace m3gm

#endif  // M3GM_OPTIM_HPP_
