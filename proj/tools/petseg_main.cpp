#include <iostream>

int main() {
    std::cout << "petseg CLI placeholder\n";
    return 0;
}
