// ockjl.hpp
//
// Efficient one-class novelty detection: kernel embeddings (Nystrom,
// KJL) scored by Gaussian mixtures, with a one-class SVM baseline and
// the flow featurization and benchmark tooling around them.

#ifndef OCKJL_OCKJL_HPP
#define OCKJL_OCKJL_HPP

#include "ockjl/common.hpp"
#include "ockjl/detector.hpp"
#include "ockjl/embedding.hpp"
#include "ockjl/eval.hpp"
#include "ockjl/flows.hpp"
#include "ockjl/gmm.hpp"
#include "ockjl/kernel.hpp"
#include "ockjl/ocsvm.hpp"
#include "ockjl/pcap.hpp"
#include "ockjl/quickshift.hpp"
#include "ockjl/table_csv.hpp"

#endif // OCKJL_OCKJL_HPP
