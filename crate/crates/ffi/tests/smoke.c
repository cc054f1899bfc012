/* SPDX-License-Identifier: Apache-2.0 */
#include <stdio.h>
#include "userrec.h"

int main(void) {
    double features[10];
    uint16_t groups[10];
    for (int i = 0; i < 10; i++) {
        features[i] = i * i;
        groups[i] = i % 2;
    }
    UrProvider *p = NULL;
    UrAttributes *a = NULL;
    if (ur_provider_knn(features, 10, 1, 3, &p) != UR_STATUS_OK) return 1;
    if (ur_attributes_new(groups, 10, 2, &a) != UR_STATUS_OK) return 1;

    uint32_t out[3];
    size_t len = 0;
    if (ur_provider_query(p, 5, out, 3, &len) != UR_STATUS_OK) return 1;
    printf("%u %u %u\n", out[0], out[1], out[2]);

    UrParams params = ur_params_default();
    params.tau = 2;
    UrStatus s = ur_recommend(p, a, UR_METHOD_CONSUL, 5, &params, NULL, 0, out, 3, &len, NULL);
    if (s == UR_STATUS_CONSTRAINT && ur_last_error_message() != NULL) printf("constraint\n");

    ur_attributes_free(a);
    ur_provider_free(p);
    return 0;
}
