from sys import exit

from plate_regularity.cli import main

if __name__ == "__main__":
    exit(main())
