#include <cstdio>

int main() {
    std::puts("gridfdi: command-line front end not wired yet");
    return 64;
}
