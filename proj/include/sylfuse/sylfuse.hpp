#pragma once

#include "sylfuse/config.hpp"
#include "sylfuse/core.hpp"
#include "sylfuse/estimators.hpp"
#include "sylfuse/fft.hpp"
#include "sylfuse/io.hpp"
#include "sylfuse/metrics.hpp"
#include "sylfuse/model.hpp"
#include "sylfuse/parallel.hpp"
#include "sylfuse/subspace.hpp"
#include "sylfuse/sylvester.hpp"
#include "sylfuse/synthetic.hpp"
