#pragma once

#include <stdexcept>
#include <string>

namespace atomcast {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// trajectory / windowing
class TrajectoryTooShort : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };
class HorizonMismatch : public Error { public: using Error::Error; };
class SegmentTooShort : public Error { public: using Error::Error; };

// file I/O
class ParseError : public Error { public: using Error::Error; };
class InconsistentAtomCount : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// morse
class NonPositiveDistance : public Error { public: using Error::Error; };
class FitDiverged : public Error { public: using Error::Error; };
class DegenerateSamples : public Error { public: using Error::Error; };
class MissingPairParams : public Error { public: using Error::Error; };
class IndexOutOfRange : public Error { public: using Error::Error; };
class SelfPair : public Error { public: using Error::Error; };

// simulation
class BlowUp : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };

// dataset / training
class EmptyInput : public Error { public: using Error::Error; };
class EmptyDataset : public Error { public: using Error::Error; };
class NonFiniteLoss : public Error { public: using Error::Error; };
class NonFiniteGradient : public Error { public: using Error::Error; };

// rollout
class NonFinitePrediction : public Error { public: using Error::Error; };

// metrics
class NoAtomsOfSpecies : public Error { public: using Error::Error; };
class WindowOutOfRange : public Error { public: using Error::Error; };

} // namespace atomcast
