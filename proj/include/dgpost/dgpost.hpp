#ifndef DGPOST_DGPOST_HPP
#define DGPOST_DGPOST_HPP

#include "errors.hpp"
#include "mesh.hpp"
#include "lgl.hpp"
#include "tensor_ops.hpp"
#include "fourier.hpp"
#include "field.hpp"
#include "basis.hpp"
#include "eigen.hpp"
#include "local_constants.hpp"
#include "dg.hpp"
#include "reference.hpp"
#include "estimators.hpp"
#include "experiment.hpp"

#endif
