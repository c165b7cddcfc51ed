# bisimagg Core Package
