#ifndef M3GM_TYPES_HPP_
#define M3GM_TYPES_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace m3gm {

using NodeId = std::uint32_t;
using RelationId = std::uint8_t;

// Relation sets are packed into a 64-bit mask per node pair.
inline constexpr std::size_t kMaxRelations = 64;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

struct Edge {
    NodeId source = 0;
    RelationId relation = 0;
    NodeId target = 0;

    bool is_loop() const { return source == target; }
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Direction : std::uint8_t { PredictTarget, PredictSource };

inline const char* to_string(Direction d) {
    return d == Direction::PredictTarget ? "target" : "source";
}

// Error classes. The CLI maps each family onto its own exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GraphError : Error {
    using Error::Error;
};
struct DuplicateEdgeError : GraphError {
    using GraphError::GraphError;
};
struct MissingEdgeError : GraphError {
    using GraphError::GraphError;
};
struct InvalidIdError : GraphError {
    using GraphError::GraphError;
};
struct FormatError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace m3gm

#endif  // M3GM_TYPES_HPP_
