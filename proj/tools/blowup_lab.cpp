#include <cstdio>

int main() {
    std::puts("blowup_lab: CLI under construction");
    return 1;
}
