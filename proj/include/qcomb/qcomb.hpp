// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_QCOMB_HPP
#define QCOMB_QCOMB_HPP

#include "qcomb/algebra.hpp"
#include "qcomb/tensor.hpp"
#include "qcomb/choi.hpp"
#include "qcomb/subspace.hpp"
#include "qcomb/gchannel.hpp"
#include "qcomb/comb.hpp"
#include "qcomb/decompose.hpp"
#include "qcomb/sampler.hpp"
#include "qcomb/io.hpp"

#endif
