import sys

from massbounds.cli import main

sys.exit(main())
