#include <stdio.h>
#include <stdint.h>

int32_t triangle_number(int32_t n);

int main(void) {
    int failures = 0;
    {  /* case 0 */
        int32_t c0_n = 10;
        int32_t result = triangle_number(c0_n);
        if (result != 55) {
            printf("case 0: expected 55, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    {  /* case 1 */
        int32_t c1_n = 0;
        int32_t result = triangle_number(c1_n);
        if (result != 0) {
            printf("case 1: expected 0, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    {  /* case 2 */
        int32_t c2_n = 1;
        int32_t result = triangle_number(c2_n);
        if (result != 1) {
            printf("case 2: expected 1, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    {  /* case 3 */
        int32_t c3_n = 100;
        int32_t result = triangle_number(c3_n);
        if (result != 5050) {
            printf("case 3: expected 5050, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    if (failures != 0) {
        printf("%d case(s) failed\n", failures);
        return 1;
    }
    printf("all 4 case(s) passed\n");
    return 0;
}
